#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dnfer/matrix.hpp"

namespace dnfer {

// Per-class dynamic threshold T_c: the mean posterior probability of class c
// over the batch samples labelled c. Classes absent from the batch carry no
// value.
struct ThresholdVector {
  std::vector<std::optional<double>> values;

  std::size_t num_classes() const { return values.size(); }
};

struct SelectionMask {
  std::vector<std::uint8_t> flags;
  std::size_t selected_count = 0;
};

ThresholdVector compute_thresholds(const Matrix& posteriors,
                                   const std::vector<int>& labels);

// flags[i] = posteriors(i, labels[i]) >= T_{labels[i]}. The comparison is
// non-strict, so every class present in the batch keeps at least one sample
// (its max is never below its mean).
SelectionMask select_clean(const Matrix& posteriors, const std::vector<int>& labels,
                           const ThresholdVector& thresholds);

}  // namespace dnfer
