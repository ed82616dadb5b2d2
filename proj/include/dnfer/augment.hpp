#pragma once

#include <string>
#include <vector>

#include "dnfer/dataset.hpp"
#include "dnfer/rng.hpp"

namespace dnfer {

enum class View { kWeak, kStrong };

struct WeakAugment {
  double jitter_sigma = 0.0;  // vector data: additive Gaussian noise
  int shift_max = 0;          // image data: pad-and-random-crop shift
  double flip_prob = 0.0;     // image data: horizontal flip probability
};

struct StrongAugment {
  std::vector<std::string> transform_pool;
  int picks_per_sample = 2;  // composed transforms drawn without replacement
  double magnitude = 0.1;    // in (0,1], scales every pool transform
};

// Vector pool: jitter, dropout, scale, rotate (random 2-plane).
// Image pool: invert, rotate, translate, contrast.
struct AugmentationPolicy {
  WeakAugment weak;
  StrongAugment strong;

  void validate() const;  // pool names known, picks <= pool size

  // Weak jitter at 5% of the pooled feature std for vectors; flip 0.5 plus a
  // 4-pixel shift (scaled from 28x28) for images. Strong: full pool, two
  // picks, magnitude 0.3.
  static AugmentationPolicy defaults_for(const Dataset& dataset);
};

struct SampleShape {
  Modality modality = Modality::kVector;
  std::size_t height = 0;
  std::size_t width = 0;
};

// One freshly augmented view of a sample's features. Deterministic given the
// rng state; never touches labels.
std::vector<double> augment(const LabeledSample& sample, const SampleShape& shape,
                            const AugmentationPolicy& policy, View view, Rng& rng);

}  // namespace dnfer
