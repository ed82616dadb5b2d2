#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dnfer {

enum class Split { kTrain, kTest };
enum class Modality { kVector, kImage };

struct LabeledSample {
  std::vector<double> features;  // images stored row-major h*w, values in [0,1]
  int observed_label = 0;
  std::optional<int> true_label;
  std::uint64_t sample_id = 0;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  int num_classes = 0;
  Split split = Split::kTrain;
  Modality modality = Modality::kVector;
  std::size_t image_height = 0;  // set for image modality
  std::size_t image_width = 0;

  std::size_t size() const { return samples.size(); }
  std::size_t feature_dim() const {
    return samples.empty() ? 0 : samples.front().features.size();
  }

  // Throws InputError on out-of-range labels, non-finite features,
  // inhomogeneous dimensions or duplicate sample ids.
  void validate() const;

  // Population standard deviation pooled over all feature entries.
  double feature_std() const;
};

struct NoiseSpec {
  double rate = 0.0;  // symmetric-uniform flips
  std::uint64_t seed = 0;
};

struct NoiseResult {
  Dataset dataset;
  std::vector<std::uint8_t> flipped;  // per-sample, aligned with dataset order
};

// Gaussian clusters with unit within-class standard deviation. Class means
// are a deterministic function of (num_classes, dim, separation) and sit at
// mutual distance >= separation, so datasets generated with different seeds
// share the same class geometry.
Dataset generate_blobs(int num_classes, const std::vector<std::size_t>& samples_per_class,
                       std::size_t dim, double separation, std::uint64_t seed,
                       Split split = Split::kTrain);

// CSV with header feature_0,...,feature_{d-1},label[,true_label].
// num_classes_override = 0 infers C as max label + 1.
Dataset load_csv(const std::string& path, int num_classes_override = 0);

// Big-endian IDX3 images (magic 0x00000803) + IDX1 labels (0x00000801);
// pixel bytes scaled to [0,1].
Dataset load_idx(const std::string& image_path, const std::string& label_path,
                 int num_classes_override = 0);

// Flips exactly round(rate * N) observed labels, each redrawn uniformly from
// the C-1 classes other than the sample's true label. true_label is filled
// from observed_label where absent, then preserved.
NoiseResult inject_noise(const Dataset& dataset, const NoiseSpec& spec);

// Two-column CSV "sample_id,flipped" describing a noise mask.
std::string noise_mask_csv(const Dataset& dataset,
                           const std::vector<std::uint8_t>& flipped);

}  // namespace dnfer
