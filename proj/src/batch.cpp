#include "dnfer/batch.hpp"

#include <algorithm>
#include <numeric>

#include "dnfer/error.hpp"

namespace dnfer {

BatchIterator::BatchIterator(const Dataset& dataset, std::size_t batch_size,
                             bool oversample, const AugmentationPolicy& policy,
                             std::uint64_t seed, std::size_t epoch)
    : dataset_(dataset),
      batch_size_(batch_size),
      policy_(policy),
      rng_(seed ^ static_cast<std::uint64_t>(epoch)) {
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  dataset_.validate();
  policy_.validate();
  shape_ = {dataset_.modality, dataset_.image_height, dataset_.image_width};
  all_true_labels_ = std::all_of(dataset_.samples.begin(), dataset_.samples.end(),
                                 [](const LabeledSample& s) { return s.true_label.has_value(); });

  const std::size_t n = dataset_.size();
  if (!oversample) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    rng_.shuffle(order_);
    return;
  }

  // class-uniform draws with replacement, over classes that actually appear
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset_.num_classes));
  for (std::size_t i = 0; i < n; ++i)
    by_class[static_cast<std::size_t>(dataset_.samples[i].observed_label)].push_back(i);
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (!by_class[c].empty()) present.push_back(c);
  order_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = present[rng_.below(present.size())];
    order_.push_back(by_class[c][rng_.below(by_class[c].size())]);
  }
}

std::size_t BatchIterator::num_batches() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

std::optional<BatchViews> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t begin = cursor_;
  const std::size_t end = std::min(order_.size(), begin + batch_size_);
  cursor_ = end;
  const std::size_t b = end - begin;
  const std::size_t d = dataset_.feature_dim();

  BatchViews batch;
  batch.weak = Matrix(b, d);
  batch.strong = Matrix(b, d);
  batch.labels.resize(b);
  batch.sample_ids.resize(b);
  if (all_true_labels_) batch.true_labels.emplace(b);

  for (std::size_t i = 0; i < b; ++i) {
    const LabeledSample& s = dataset_.samples[order_[begin + i]];
    const std::vector<double> weak = augment(s, shape_, policy_, View::kWeak, rng_);
    const std::vector<double> strong = augment(s, shape_, policy_, View::kStrong, rng_);
    std::copy(weak.begin(), weak.end(), batch.weak.row(i));
    std::copy(strong.begin(), strong.end(), batch.strong.row(i));
    batch.labels[i] = s.observed_label;
    batch.sample_ids[i] = s.sample_id;
    if (batch.true_labels) (*batch.true_labels)[i] = *s.true_label;
  }
  return batch;
}

std::vector<BatchViews> make_batches(const Dataset& dataset, std::size_t batch_size,
                                     bool oversample, const AugmentationPolicy& policy,
                                     std::uint64_t seed, std::size_t epoch) {
  BatchIterator it(dataset, batch_size, oversample, policy, seed, epoch);
  std::vector<BatchViews> batches;
  while (auto b = it.next()) batches.push_back(std::move(*b));
  return batches;
}

}  // namespace dnfer
