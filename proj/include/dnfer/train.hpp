#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnfer/adam.hpp"
#include "dnfer/augment.hpp"
#include "dnfer/batch.hpp"
#include "dnfer/dataset.hpp"
#include "dnfer/metrics.hpp"
#include "dnfer/mlp.hpp"
#include "dnfer/selection.hpp"

namespace dnfer {

enum class SelectionView { kWeak, kStrong, kMean };

// baseline: plain cross-entropy on the weak view of every sample, all epochs.
// sup_only: selection active after warm-up, consistency never weighted in.
// cons_only: after warm-up only the consistency loss is optimized.
// dnfer: the full method.
enum class TrainMode { kDnfer, kBaseline, kSupOnly, kConsOnly };

struct TrainConfig {
  double alpha = 0.5;
  std::size_t warm_epochs = 5;
  std::size_t max_epochs = 40;
  std::size_t batch_size = 128;
  double initial_lr = 0.001;
  double lr_decay = 0.95;
  std::uint64_t seed = 0;
  bool oversample = false;
  SelectionView selection_view = SelectionView::kWeak;
  std::vector<std::size_t> hidden_dims = {64, 64};

  void validate() const;
};

// L_sup: cross-entropy of each view on the selected rows, two means summed.
double supervision_loss(const Matrix& p_w, const Matrix& p_s,
                        const std::vector<int>& labels, const SelectionMask& mask);

// L_cons: symmetric KL between the views' posteriors over all rows, no mask.
double consistency_loss(const Matrix& p_w, const Matrix& p_s);

// alpha * l_cons + (1 - alpha) * l_sup.
double total_loss(double alpha, double l_sup, double l_cons);

// 0 during warm-up, config.alpha afterwards.
double alpha_schedule(std::size_t epoch, const TrainConfig& config);

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // within the epoch
  double lr = 0.0;
  double alpha = 0.0;
  ThresholdVector thresholds;
  std::size_t batch_size = 0;
  std::size_t selected_count = 0;
  double sup_loss = 0.0;
  double cons_loss = 0.0;
  double loss = 0.0;
  std::optional<double> selection_precision;
  std::optional<double> selection_recall;
  // raw counts behind precision/recall, kept so epoch aggregates can pool
  std::optional<std::size_t> selected_clean_count;
  std::optional<std::size_t> clean_count;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double alpha = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double mean_sup_loss = 0.0;
  double mean_cons_loss = 0.0;
  double selected_fraction = 0.0;
  std::optional<double> selection_precision;
  std::optional<double> selection_recall;
  std::vector<std::optional<double>> per_class_thresholds;  // epoch means
  // Accuracy against observed labels on the flipped subset; present when the
  // train set carries true labels and at least one label was flipped.
  std::optional<double> memorization_rate;
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
  ConfusionMatrix final_confusion;  // on the test set
  double final_test_acc = 0.0;

  // One JSON object per epoch plus a final confusion-matrix record.
  std::string to_jsonl() const;
};

struct TrainResult {
  MlpModel model;
  AdamState opt_state;
  RunMetrics metrics;
};

// One optimizer update on one mini-batch. Selection posteriors come from
// config.selection_view; during warm-up every sample counts as selected and
// only the supervision loss is optimized. Thresholds are recomputed from the
// current posteriors each call and recorded either way.
StepRecord train_step(MlpModel& model, AdamState& opt_state, const BatchViews& batch,
                      const TrainConfig& config, std::size_t epoch,
                      TrainMode mode = TrainMode::kDnfer);

// Full training loop: max_epochs of shuffled mini-batches with a fresh
// iterator per epoch, end-of-epoch evaluation on both sets. Deterministic
// under config.seed.
TrainResult train(const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& config, TrainMode mode = TrainMode::kDnfer,
                  const AugmentationPolicy* policy = nullptr);

}  // namespace dnfer
