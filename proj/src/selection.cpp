#include "dnfer/selection.hpp"

#include <string>

#include "dnfer/error.hpp"

namespace dnfer {

ThresholdVector compute_thresholds(const Matrix& posteriors,
                                   const std::vector<int>& labels) {
  if (labels.size() != posteriors.rows())
    throw InputError("compute_thresholds: labels length != batch size");
  const std::size_t classes = posteriors.cols();
  std::vector<double> sums(classes, 0.0);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw InputError("compute_thresholds: label " + std::to_string(y) + " out of range");
    sums[static_cast<std::size_t>(y)] += posteriors(i, static_cast<std::size_t>(y));
    counts[static_cast<std::size_t>(y)] += 1;
  }
  ThresholdVector thresholds;
  thresholds.values.resize(classes);
  for (std::size_t c = 0; c < classes; ++c)
    if (counts[c] > 0)
      thresholds.values[c] = sums[c] / static_cast<double>(counts[c]);
  return thresholds;
}

SelectionMask select_clean(const Matrix& posteriors, const std::vector<int>& labels,
                           const ThresholdVector& thresholds) {
  if (labels.size() != posteriors.rows())
    throw InputError("select_clean: labels length != batch size");
  if (thresholds.num_classes() != posteriors.cols())
    throw InputError("select_clean: threshold vector has wrong class count");
  SelectionMask mask;
  mask.flags.assign(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const std::optional<double>& t = thresholds.values[y];
    if (!t.has_value())
      throw InputError("select_clean: no threshold for class " + std::to_string(labels[i]) +
                       " present in the batch");
    if (posteriors(i, y) >= *t) {
      mask.flags[i] = 1;
      mask.selected_count += 1;
    }
  }
  return mask;
}

}  // namespace dnfer
