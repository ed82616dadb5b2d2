#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dnfer/augment.hpp"
#include "dnfer/dataset.hpp"
#include "dnfer/matrix.hpp"

namespace dnfer {

// One mini-batch: weak and strong views of the same underlying samples,
// index-aligned row by row.
struct BatchViews {
  Matrix weak;
  Matrix strong;
  std::vector<int> labels;
  std::optional<std::vector<int>> true_labels;
  std::vector<std::uint64_t> sample_ids;

  std::size_t size() const { return labels.size(); }
};

// Epoch iterator over shuffled mini-batches. Owns an Rng derived from
// (seed xor epoch); repeat construction with the same arguments reproduces
// batch composition and augmented views exactly. With oversample, samples are
// drawn with replacement, class-uniform over the classes present, so the
// expected per-batch class histogram is flat.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, std::size_t batch_size, bool oversample,
                const AugmentationPolicy& policy, std::uint64_t seed,
                std::size_t epoch);

  std::optional<BatchViews> next();
  std::size_t num_batches() const;

 private:
  const Dataset& dataset_;
  std::size_t batch_size_;
  AugmentationPolicy policy_;
  SampleShape shape_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  bool all_true_labels_ = false;
};

// Eager convenience wrapper around BatchIterator.
std::vector<BatchViews> make_batches(const Dataset& dataset, std::size_t batch_size,
                                     bool oversample, const AugmentationPolicy& policy,
                                     std::uint64_t seed, std::size_t epoch);

}  // namespace dnfer
