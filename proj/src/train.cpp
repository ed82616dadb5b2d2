#include "dnfer/train.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "dnfer/error.hpp"
#include "dnfer/losses.hpp"

namespace dnfer {

namespace {

using ordered_json = nlohmann::ordered_json;

Matrix mean_of_views(const Matrix& p_w, const Matrix& p_s) {
  Matrix out(p_w.rows(), p_w.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = 0.5 * (p_w.data()[i] + p_s.data()[i]);
  return out;
}

std::vector<std::uint8_t> flipped_flags_of(const BatchViews& batch) {
  std::vector<std::uint8_t> flags(batch.size(), 0);
  for (std::size_t i = 0; i < batch.size(); ++i)
    flags[i] = (*batch.true_labels)[i] != batch.labels[i] ? 1 : 0;
  return flags;
}

ordered_json opt_to_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

}  // namespace

void TrainConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("config: alpha must lie in [0,1]");
  if (max_epochs < 1) throw ConfigError("config: max_epochs must be positive");
  if (warm_epochs >= max_epochs)
    throw ConfigError("config: warm_epochs must be smaller than max_epochs");
  if (batch_size < 1) throw ConfigError("config: batch_size must be positive");
  if (initial_lr <= 0.0) throw ConfigError("config: initial_lr must be positive");
  if (lr_decay <= 0.0 || lr_decay > 1.0)
    throw ConfigError("config: lr_decay must lie in (0,1]");
  for (std::size_t h : hidden_dims)
    if (h == 0) throw ConfigError("config: hidden dims must be positive");
}

double supervision_loss(const Matrix& p_w, const Matrix& p_s,
                        const std::vector<int>& labels, const SelectionMask& mask) {
  if (labels.empty()) throw InputError("supervision_loss: empty batch");
  if (p_w.rows() != labels.size() || !p_w.same_shape(p_s) ||
      mask.flags.size() != labels.size())
    throw InputError("supervision_loss: inputs not index-aligned");
  if (mask.selected_count == 0) return 0.0;

  constexpr double kProbFloor = 1e-12;
  double sum_w = 0.0, sum_s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask.flags[i]) continue;
    const auto y = static_cast<std::size_t>(labels[i]);
    sum_w += -std::log(std::max(p_w(i, y), kProbFloor));
    sum_s += -std::log(std::max(p_s(i, y), kProbFloor));
  }
  const auto m = static_cast<double>(mask.selected_count);
  return sum_w / m + sum_s / m;
}

double consistency_loss(const Matrix& p_w, const Matrix& p_s) {
  return symmetric_kl(p_s, p_w);
}

double total_loss(double alpha, double l_sup, double l_cons) {
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("total_loss: alpha must lie in [0,1]");
  return alpha * l_cons + (1.0 - alpha) * l_sup;
}

double alpha_schedule(std::size_t epoch, const TrainConfig& config) {
  return epoch < config.warm_epochs ? 0.0 : config.alpha;
}

StepRecord train_step(MlpModel& model, AdamState& opt_state, const BatchViews& batch,
                      const TrainConfig& config, std::size_t epoch, TrainMode mode) {
  config.validate();
  if (batch.size() == 0) throw InputError("train_step: empty batch");

  const Matrix p_w = forward(model, batch.weak);
  const Matrix p_s = forward(model, batch.strong);

  const Matrix* sel_post = &p_w;
  Matrix mean_post;
  if (config.selection_view == SelectionView::kStrong) {
    sel_post = &p_s;
  } else if (config.selection_view == SelectionView::kMean) {
    mean_post = mean_of_views(p_w, p_s);
    sel_post = &mean_post;
  }

  StepRecord record;
  record.epoch = epoch;
  record.lr = config.initial_lr * std::pow(config.lr_decay, static_cast<double>(epoch));
  record.batch_size = batch.size();
  record.thresholds = compute_thresholds(*sel_post, batch.labels);

  const bool warm = epoch < config.warm_epochs;
  const bool select = mode != TrainMode::kBaseline && !warm;

  SelectionMask mask;
  if (select) {
    mask = select_clean(*sel_post, batch.labels, record.thresholds);
  } else {
    mask.flags.assign(batch.size(), 1);
    mask.selected_count = batch.size();
  }

  double alpha_eff = 0.0;
  switch (mode) {
    case TrainMode::kDnfer:
      alpha_eff = alpha_schedule(epoch, config);
      break;
    case TrainMode::kConsOnly:
      alpha_eff = warm ? 0.0 : 1.0;
      break;
    case TrainMode::kBaseline:
    case TrainMode::kSupOnly:
      alpha_eff = 0.0;
      break;
  }

  record.alpha = alpha_eff;
  record.selected_count = mask.selected_count;
  record.cons_loss = consistency_loss(p_w, p_s);

  GradientSet grads;
  if (mode == TrainMode::kBaseline) {
    grads = ce_backward(model, batch.weak, batch.labels);
    record.sup_loss = grads.loss;
    record.loss = grads.loss;
  } else {
    grads = backward(model, batch.weak, batch.strong, batch.labels, mask.flags, alpha_eff);
    record.sup_loss = supervision_loss(p_w, p_s, batch.labels, mask);
    record.loss = total_loss(alpha_eff, record.sup_loss, record.cons_loss);
  }

  if (batch.true_labels) {
    const std::vector<std::uint8_t> flipped = flipped_flags_of(batch);
    const SelectionQuality q = selection_quality(mask, flipped);
    record.selection_precision = q.precision;
    record.selection_recall = q.recall;
    std::size_t clean = 0, clean_selected = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      clean += (flipped[i] == 0);
      clean_selected += (flipped[i] == 0 && mask.flags[i] != 0);
    }
    record.selected_clean_count = clean_selected;
    record.clean_count = clean;
  }

  adam_step(model, grads, opt_state, record.lr);
  return record;
}

TrainResult train(const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& config, TrainMode mode,
                  const AugmentationPolicy* policy) {
  config.validate();
  train_set.validate();
  test_set.validate();
  if (train_set.num_classes != test_set.num_classes ||
      train_set.feature_dim() != test_set.feature_dim())
    throw ConfigError("train: train/test sets are not compatible");

  const AugmentationPolicy aug =
      policy != nullptr ? *policy : AugmentationPolicy::defaults_for(train_set);

  std::vector<std::size_t> dims;
  dims.push_back(train_set.feature_dim());
  for (std::size_t h : config.hidden_dims) dims.push_back(h);
  dims.push_back(static_cast<std::size_t>(train_set.num_classes));

  Rng master(config.seed);
  const std::uint64_t model_seed = master.next_u64();
  const std::uint64_t data_seed = master.next_u64();
  Rng init_rng(model_seed);

  TrainResult result;
  result.model = MlpModel::init(dims, init_rng);
  result.opt_state = make_adam_state(result.model);

  // flipped subset for memorization tracking, when ground truth is known
  std::vector<std::uint8_t> flipped(train_set.size(), 0);
  bool any_flipped = false;
  bool have_truth = true;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const LabeledSample& s = train_set.samples[i];
    if (!s.true_label) {
      have_truth = false;
      break;
    }
    flipped[i] = (*s.true_label != s.observed_label) ? 1 : 0;
    any_flipped = any_flipped || flipped[i];
  }
  const bool track_memorization = have_truth && any_flipped;

  const auto classes = static_cast<std::size_t>(train_set.num_classes);
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    BatchIterator batches(train_set, config.batch_size, config.oversample, aug,
                          data_seed, epoch);
    EpochRecord er;
    er.epoch = epoch;
    double sup_sum = 0.0, cons_sum = 0.0;
    std::size_t steps = 0, selected_sum = 0, sample_sum = 0;
    std::size_t sel_clean = 0, sel_total = 0, clean_total = 0;
    std::vector<double> threshold_sums(classes, 0.0);
    std::vector<std::size_t> threshold_counts(classes, 0);

    while (auto batch = batches.next()) {
      StepRecord sr = train_step(result.model, result.opt_state, *batch, config,
                                 epoch, mode);
      sr.step = steps;
      er.lr = sr.lr;
      er.alpha = sr.alpha;
      sup_sum += sr.sup_loss;
      cons_sum += sr.cons_loss;
      selected_sum += sr.selected_count;
      sample_sum += sr.batch_size;
      for (std::size_t c = 0; c < classes; ++c)
        if (sr.thresholds.values[c]) {
          threshold_sums[c] += *sr.thresholds.values[c];
          threshold_counts[c] += 1;
        }
      if (sr.selected_clean_count) {
        sel_clean += *sr.selected_clean_count;
        sel_total += sr.selected_count;
        clean_total += *sr.clean_count;
      }
      ++steps;
      result.metrics.steps.push_back(std::move(sr));
    }

    if (sel_total > 0)
      er.selection_precision = static_cast<double>(sel_clean) / static_cast<double>(sel_total);
    if (clean_total > 0)
      er.selection_recall = static_cast<double>(sel_clean) / static_cast<double>(clean_total);

    er.mean_sup_loss = steps > 0 ? sup_sum / static_cast<double>(steps) : 0.0;
    er.mean_cons_loss = steps > 0 ? cons_sum / static_cast<double>(steps) : 0.0;
    er.selected_fraction =
        sample_sum > 0 ? static_cast<double>(selected_sum) / static_cast<double>(sample_sum)
                       : 0.0;
    er.per_class_thresholds.resize(classes);
    for (std::size_t c = 0; c < classes; ++c)
      if (threshold_counts[c] > 0)
        er.per_class_thresholds[c] =
            threshold_sums[c] / static_cast<double>(threshold_counts[c]);

    er.train_acc = evaluate(result.model, train_set).accuracy;
    const EvalResult test_eval = evaluate(result.model, test_set);
    er.test_acc = test_eval.accuracy;
    if (track_memorization)
      er.memorization_rate = evaluate_subset(result.model, train_set, flipped).accuracy;

    if (epoch + 1 == config.max_epochs) {
      result.metrics.final_confusion = test_eval.confusion;
      result.metrics.final_test_acc = test_eval.accuracy;
    }
    result.metrics.epochs.push_back(std::move(er));
  }
  return result;
}

std::string RunMetrics::to_jsonl() const {
  std::string out;
  for (const EpochRecord& er : epochs) {
    ordered_json j;
    j["epoch"] = er.epoch;
    j["lr"] = er.lr;
    j["alpha"] = er.alpha;
    j["train_acc"] = er.train_acc;
    j["test_acc"] = er.test_acc;
    j["mean_sup_loss"] = er.mean_sup_loss;
    j["mean_cons_loss"] = er.mean_cons_loss;
    j["selected_fraction"] = er.selected_fraction;
    j["selection_precision"] = opt_to_json(er.selection_precision);
    j["selection_recall"] = opt_to_json(er.selection_recall);
    ordered_json thresholds = ordered_json::array();
    for (const auto& t : er.per_class_thresholds) thresholds.push_back(opt_to_json(t));
    j["per_class_thresholds"] = std::move(thresholds);
    if (er.memorization_rate) j["memorization_rate"] = *er.memorization_rate;
    out += j.dump();
    out += "\n";
  }
  ordered_json final_record;
  ordered_json matrix = ordered_json::array();
  for (std::size_t r = 0; r < final_confusion.num_classes; ++r) {
    ordered_json row = ordered_json::array();
    for (std::size_t p = 0; p < final_confusion.num_classes; ++p)
      row.push_back(final_confusion.at(r, p));
    matrix.push_back(std::move(row));
  }
  final_record["confusion_matrix"] = std::move(matrix);
  final_record["test_accuracy"] = final_test_acc;
  out += final_record.dump();
  out += "\n";
  return out;
}

}  // namespace dnfer
