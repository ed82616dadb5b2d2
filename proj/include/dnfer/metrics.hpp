#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnfer/dataset.hpp"
#include "dnfer/mlp.hpp"
#include "dnfer/selection.hpp"

namespace dnfer {

struct RunMetrics;  // train.hpp

// Rows are the reference (true or observed) class, columns the prediction.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;  // row-major C x C

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes)
      : num_classes(classes), counts(classes * classes, 0) {}

  std::uint64_t& at(std::size_t ref, std::size_t pred) {
    return counts[ref * num_classes + pred];
  }
  std::uint64_t at(std::size_t ref, std::size_t pred) const {
    return counts[ref * num_classes + pred];
  }
  std::uint64_t total() const;
  std::uint64_t diagonal() const;
  std::uint64_t row_sum(std::size_t ref) const;

  std::string to_csv() const;
  std::string to_table() const;
};

struct EvalResult {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from the set
};

// Argmax predictions on un-augmented inputs; ties break toward the lowest
// class index. Rows of the confusion matrix are observed labels.
EvalResult evaluate(const MlpModel& model, const Dataset& dataset);

// Same, restricted to rows where keep[i] != 0.
EvalResult evaluate_subset(const MlpModel& model, const Dataset& dataset,
                           const std::vector<std::uint8_t>& keep);

struct SelectionQuality {
  std::optional<double> precision;  // clean-and-selected / selected
  std::optional<double> recall;     // clean-and-selected / clean
  double selected_fraction = 0.0;
};

// Scores a selection mask against known per-sample flipped flags
// (clean = not flipped). Absent fields had a zero denominator.
SelectionQuality selection_quality(const SelectionMask& mask,
                                   const std::vector<std::uint8_t>& flipped_flags);

// Paired per-epoch memorization curves: accuracy on the flipped-label subset
// measured against the observed (wrong) labels, plus test accuracy, for a
// baseline run and a treated run over the same noisy dataset.
struct GapReport {
  struct Row {
    std::size_t epoch = 0;
    double baseline_memorization = 0.0;
    double treated_memorization = 0.0;
    double baseline_test_acc = 0.0;
    double treated_test_acc = 0.0;
  };
  std::vector<Row> rows;

  std::string to_csv() const;
  std::string to_table() const;
};

GapReport memorization_trace(const RunMetrics& baseline_run,
                             const RunMetrics& treated_run);

}  // namespace dnfer
