#include "dnfer/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dnfer/error.hpp"
#include "dnfer/text.hpp"
#include "dnfer/train.hpp"

namespace dnfer {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (std::uint64_t v : counts) n += v;
  return n;
}

std::uint64_t ConfusionMatrix::diagonal() const {
  std::uint64_t n = 0;
  for (std::size_t c = 0; c < num_classes; ++c) n += at(c, c);
  return n;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t ref) const {
  std::uint64_t n = 0;
  for (std::size_t p = 0; p < num_classes; ++p) n += at(ref, p);
  return n;
}

std::string ConfusionMatrix::to_csv() const {
  std::string out = "ref\\pred";
  for (std::size_t p = 0; p < num_classes; ++p) out += "," + std::to_string(p);
  out += "\n";
  for (std::size_t r = 0; r < num_classes; ++r) {
    out += std::to_string(r);
    for (std::size_t p = 0; p < num_classes; ++p) out += "," + std::to_string(at(r, p));
    out += "\n";
  }
  return out;
}

std::string ConfusionMatrix::to_table() const {
  std::size_t width = 8;
  for (std::uint64_t v : counts)
    width = std::max(width, std::to_string(v).size() + 2);
  const auto pad = [width](const std::string& s) {
    return std::string(width > s.size() ? width - s.size() : 1, ' ') + s;
  };
  std::string out = pad("ref\\pred");
  for (std::size_t p = 0; p < num_classes; ++p) out += pad(std::to_string(p));
  out += "\n";
  for (std::size_t r = 0; r < num_classes; ++r) {
    out += pad(std::to_string(r));
    for (std::size_t p = 0; p < num_classes; ++p) out += pad(std::to_string(at(r, p)));
    out += "\n";
  }
  return out;
}

namespace {

EvalResult evaluate_impl(const MlpModel& model, const Dataset& dataset,
                         const std::vector<std::uint8_t>* keep) {
  dataset.validate();
  if (dataset.feature_dim() != model.input_dim())
    throw ConfigError("evaluate: dataset dim " + std::to_string(dataset.feature_dim()) +
                      " != model input dim " + std::to_string(model.input_dim()));
  if (static_cast<std::size_t>(dataset.num_classes) != model.num_classes())
    throw ConfigError("evaluate: class count mismatch");

  const auto classes = static_cast<std::size_t>(dataset.num_classes);
  EvalResult result;
  result.confusion = ConfusionMatrix(classes);

  // batched forward keeps evaluation cheap on large sets
  constexpr std::size_t kChunk = 512;
  std::uint64_t correct = 0, evaluated = 0;
  std::vector<std::size_t> rows;
  for (std::size_t begin = 0; begin < dataset.size(); begin += kChunk) {
    const std::size_t end = std::min(dataset.size(), begin + kChunk);
    rows.clear();
    for (std::size_t i = begin; i < end; ++i)
      if (keep == nullptr || (*keep)[i] != 0) rows.push_back(i);
    if (rows.empty()) continue;
    Matrix inputs(rows.size(), dataset.feature_dim());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& f = dataset.samples[rows[r]].features;
      std::copy(f.begin(), f.end(), inputs.row(r));
    }
    const Matrix probs = forward(model, inputs);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::size_t pred = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (probs(r, c) > probs(r, pred)) pred = c;  // ties keep the lower index
      const auto ref = static_cast<std::size_t>(dataset.samples[rows[r]].observed_label);
      result.confusion.at(ref, pred) += 1;
      correct += (pred == ref);
      ++evaluated;
    }
  }
  if (evaluated == 0) throw InputError("evaluate: no samples to evaluate");
  result.accuracy = static_cast<double>(correct) / static_cast<double>(evaluated);
  result.per_class_accuracy.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::uint64_t row = result.confusion.row_sum(c);
    result.per_class_accuracy[c] =
        row == 0 ? std::numeric_limits<double>::quiet_NaN()
                 : static_cast<double>(result.confusion.at(c, c)) / static_cast<double>(row);
  }
  return result;
}

}  // namespace

EvalResult evaluate(const MlpModel& model, const Dataset& dataset) {
  return evaluate_impl(model, dataset, nullptr);
}

EvalResult evaluate_subset(const MlpModel& model, const Dataset& dataset,
                           const std::vector<std::uint8_t>& keep) {
  if (keep.size() != dataset.size())
    throw InputError("evaluate_subset: keep mask length mismatch");
  return evaluate_impl(model, dataset, &keep);
}

SelectionQuality selection_quality(const SelectionMask& mask,
                                   const std::vector<std::uint8_t>& flipped_flags) {
  if (mask.flags.size() != flipped_flags.size())
    throw InputError("selection_quality: length mismatch");
  std::size_t selected = 0, clean = 0, clean_selected = 0;
  for (std::size_t i = 0; i < mask.flags.size(); ++i) {
    const bool sel = mask.flags[i] != 0;
    const bool is_clean = flipped_flags[i] == 0;
    selected += sel;
    clean += is_clean;
    clean_selected += (sel && is_clean);
  }
  SelectionQuality q;
  if (!mask.flags.empty())
    q.selected_fraction = static_cast<double>(selected) / static_cast<double>(mask.flags.size());
  if (selected > 0)
    q.precision = static_cast<double>(clean_selected) / static_cast<double>(selected);
  if (clean > 0)
    q.recall = static_cast<double>(clean_selected) / static_cast<double>(clean);
  return q;
}

std::string GapReport::to_csv() const {
  std::string out =
      "epoch,baseline_memorization,treated_memorization,baseline_test_acc,treated_test_acc\n";
  for (const Row& r : rows) {
    out += std::to_string(r.epoch) + "," + format_double(r.baseline_memorization) + "," +
           format_double(r.treated_memorization) + "," + format_double(r.baseline_test_acc) +
           "," + format_double(r.treated_test_acc) + "\n";
  }
  return out;
}

std::string GapReport::to_table() const {
  const std::vector<std::string> headers = {"epoch", "base_mem", "dnfer_mem",
                                            "base_test", "dnfer_test"};
  std::string out;
  for (const auto& h : headers) out += std::string(h.size() < 22 ? 22 - h.size() : 1, ' ') + h;
  out += "\n";
  const auto pad = [](const std::string& s) {
    return std::string(s.size() < 22 ? 22 - s.size() : 1, ' ') + s;
  };
  for (const Row& r : rows) {
    out += pad(std::to_string(r.epoch));
    out += pad(format_double(r.baseline_memorization));
    out += pad(format_double(r.treated_memorization));
    out += pad(format_double(r.baseline_test_acc));
    out += pad(format_double(r.treated_test_acc));
    out += "\n";
  }
  return out;
}

GapReport memorization_trace(const RunMetrics& baseline_run,
                             const RunMetrics& treated_run) {
  if (baseline_run.epochs.size() != treated_run.epochs.size())
    throw InputError("memorization_trace: runs have different epoch counts");
  GapReport report;
  for (std::size_t e = 0; e < baseline_run.epochs.size(); ++e) {
    const EpochRecord& a = baseline_run.epochs[e];
    const EpochRecord& b = treated_run.epochs[e];
    if (!a.memorization_rate || !b.memorization_rate)
      throw InputError("memorization_trace: flipped flags missing at epoch " +
                       std::to_string(e));
    GapReport::Row row;
    row.epoch = a.epoch;
    row.baseline_memorization = *a.memorization_rate;
    row.treated_memorization = *b.memorization_rate;
    row.baseline_test_acc = a.test_acc;
    row.treated_test_acc = b.test_acc;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace dnfer
