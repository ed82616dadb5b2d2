#include "dnfer/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "dnfer/checkpoint.hpp"
#include "dnfer/error.hpp"
#include "dnfer/text.hpp"

namespace dnfer {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kNoiseSeedSalt = 0x6E6F697365ULL;  // "noise"
constexpr std::uint64_t kTestSeedSalt = 0x74657374ULL;     // "test"

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse number '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse integer '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw ConfigError("config key '" + key + "': cannot parse boolean '" + value + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(parse_u64(key, item)));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string size_list_to_string(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string selection_view_to_string(SelectionView view) {
  switch (view) {
    case SelectionView::kWeak: return "weak";
    case SelectionView::kStrong: return "strong";
    case SelectionView::kMean: return "mean";
  }
  return "weak";
}

std::string source_to_string(DatasetSource source) {
  switch (source) {
    case DatasetSource::kBlobs: return "blobs";
    case DatasetSource::kCsv: return "csv";
    case DatasetSource::kIdx: return "idx";
  }
  return "blobs";
}

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

Stats mean_std(const std::vector<double>& values) {
  Stats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

struct SingleRun {
  std::uint64_t seed = 0;
  TrainResult result;
  std::vector<std::uint8_t> flipped;
  Dataset train_set;  // kept for the noise mask export
};

SingleRun run_one(const ExperimentConfig& config, std::uint64_t seed) {
  SingleRun run;
  run.seed = seed;
  std::pair<Dataset, Dataset> data = build_datasets(config, seed, &run.flipped);
  const AugmentationPolicy policy = build_policy(config, data.first);
  TrainConfig tc = config.train;
  tc.seed = seed;
  run.result = train(data.first, data.second, tc, config.mode, &policy);
  run.train_set = std::move(data.first);
  return run;
}

void write_run_artifacts(const std::string& run_dir, const SingleRun& run,
                         bool with_noise_mask) {
  fs::create_directories(run_dir);
  write_file_atomic(run_dir + "/metrics.jsonl", run.result.metrics.to_jsonl());
  write_file_atomic(run_dir + "/confusion.csv", run.result.metrics.final_confusion.to_csv());
  if (with_noise_mask)
    write_file_atomic(run_dir + "/noise_mask.csv",
                      noise_mask_csv(run.train_set, run.flipped));
  const std::string tmp = run_dir + "/checkpoint.bin.tmp";
  save_checkpoint(tmp, run.result.model, &run.result.opt_state);
  fs::rename(tmp, run_dir + "/checkpoint.bin");
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  if (noise_rate < 0.0 || noise_rate > 1.0)
    throw ConfigError("noise_rate must lie in [0,1]");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (source == DatasetSource::kBlobs) {
    if (blob_counts.size() != blob_test_counts.size())
      throw ConfigError("blob train/test class counts differ in length");
    if (blob_counts.size() < 2) throw ConfigError("blobs need at least 2 classes");
    if (blob_dim < 1) throw ConfigError("blob_dim must be >= 1");
    if (blob_separation <= 0.0) throw ConfigError("blob_separation must be positive");
  } else if (source == DatasetSource::kCsv) {
    if (csv_path.empty() || csv_test_path.empty())
      throw ConfigError("csv source needs both csv and csv_test paths");
  } else {
    if (idx_images.empty() || idx_labels.empty() || idx_test_images.empty() ||
        idx_test_labels.empty())
      throw ConfigError("idx source needs train and test image/label paths");
  }
}

TrainMode mode_from_string(const std::string& name) {
  if (name == "dnfer") return TrainMode::kDnfer;
  if (name == "baseline") return TrainMode::kBaseline;
  if (name == "sup-only") return TrainMode::kSupOnly;
  if (name == "cons-only") return TrainMode::kConsOnly;
  throw ConfigError("unknown mode '" + name +
                    "' (expected dnfer, baseline, sup-only or cons-only)");
}

std::string mode_to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kDnfer: return "dnfer";
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kSupOnly: return "sup-only";
    case TrainMode::kConsOnly: return "cons-only";
  }
  return "dnfer";
}

SelectionView selection_view_from_string(const std::string& name) {
  if (name == "weak") return SelectionView::kWeak;
  if (name == "strong") return SelectionView::kStrong;
  if (name == "mean") return SelectionView::kMean;
  throw ConfigError("unknown selection_view '" + name + "'");
}

void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value) {
  if (key == "mode") config.mode = mode_from_string(value);
  else if (key == "alpha") config.train.alpha = parse_double(key, value);
  else if (key == "warm_epochs") config.train.warm_epochs = parse_u64(key, value);
  else if (key == "epochs" || key == "max_epochs") config.train.max_epochs = parse_u64(key, value);
  else if (key == "batch_size") config.train.batch_size = parse_u64(key, value);
  else if (key == "lr") config.train.initial_lr = parse_double(key, value);
  else if (key == "lr_decay") config.train.lr_decay = parse_double(key, value);
  else if (key == "seed") config.train.seed = parse_u64(key, value);
  else if (key == "oversample") config.train.oversample = parse_bool(key, value);
  else if (key == "selection_view") config.train.selection_view = selection_view_from_string(value);
  else if (key == "hidden_dims") config.train.hidden_dims = parse_size_list(key, value);
  else if (key == "dataset") {
    if (value == "blobs") config.source = DatasetSource::kBlobs;
    else if (value == "csv") config.source = DatasetSource::kCsv;
    else if (value == "idx") config.source = DatasetSource::kIdx;
    else throw ConfigError("unknown dataset source '" + value + "'");
  }
  else if (key == "blob_counts") config.blob_counts = parse_size_list(key, value);
  else if (key == "blob_test_counts") config.blob_test_counts = parse_size_list(key, value);
  else if (key == "blob_dim") config.blob_dim = parse_u64(key, value);
  else if (key == "blob_separation") config.blob_separation = parse_double(key, value);
  else if (key == "csv") config.csv_path = value;
  else if (key == "csv_test") config.csv_test_path = value;
  else if (key == "idx_images") config.idx_images = value;
  else if (key == "idx_labels") config.idx_labels = value;
  else if (key == "idx_test_images") config.idx_test_images = value;
  else if (key == "idx_test_labels") config.idx_test_labels = value;
  else if (key == "num_classes") config.num_classes_override = static_cast<int>(parse_u64(key, value));
  else if (key == "noise_rate") config.noise_rate = parse_double(key, value);
  else if (key == "repeats") config.repeats = parse_u64(key, value);
  else if (key == "out") config.output_dir = value;
  else if (key == "weak_jitter_sigma") config.weak_jitter_sigma = parse_double(key, value);
  else if (key == "weak_flip_prob") config.weak_flip_prob = parse_double(key, value);
  else if (key == "weak_shift_max") config.weak_shift_max = static_cast<int>(parse_u64(key, value));
  else if (key == "strong_magnitude") config.strong_magnitude = parse_double(key, value);
  else if (key == "strong_picks") config.strong_picks = static_cast<int>(parse_u64(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ": line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_entry(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string resolved_config_text(const ExperimentConfig& config) {
  std::string out;
  const auto kv = [&out](const std::string& k, const std::string& v) {
    out += k + " = " + v + "\n";
  };
  kv("mode", mode_to_string(config.mode));
  kv("alpha", format_double(config.train.alpha));
  kv("warm_epochs", std::to_string(config.train.warm_epochs));
  kv("max_epochs", std::to_string(config.train.max_epochs));
  kv("batch_size", std::to_string(config.train.batch_size));
  kv("lr", format_double(config.train.initial_lr));
  kv("lr_decay", format_double(config.train.lr_decay));
  kv("seed", std::to_string(config.train.seed));
  kv("oversample", config.train.oversample ? "true" : "false");
  kv("selection_view", selection_view_to_string(config.train.selection_view));
  kv("hidden_dims", size_list_to_string(config.train.hidden_dims));
  kv("dataset", source_to_string(config.source));
  if (config.source == DatasetSource::kBlobs) {
    kv("blob_counts", size_list_to_string(config.blob_counts));
    kv("blob_test_counts", size_list_to_string(config.blob_test_counts));
    kv("blob_dim", std::to_string(config.blob_dim));
    kv("blob_separation", format_double(config.blob_separation));
  } else if (config.source == DatasetSource::kCsv) {
    kv("csv", config.csv_path);
    kv("csv_test", config.csv_test_path);
  } else {
    kv("idx_images", config.idx_images);
    kv("idx_labels", config.idx_labels);
    kv("idx_test_images", config.idx_test_images);
    kv("idx_test_labels", config.idx_test_labels);
  }
  if (config.num_classes_override > 0)
    kv("num_classes", std::to_string(config.num_classes_override));
  kv("noise_rate", format_double(config.noise_rate));
  kv("repeats", std::to_string(config.repeats));
  if (config.weak_jitter_sigma >= 0.0) kv("weak_jitter_sigma", format_double(config.weak_jitter_sigma));
  if (config.weak_flip_prob >= 0.0) kv("weak_flip_prob", format_double(config.weak_flip_prob));
  if (config.weak_shift_max >= 0) kv("weak_shift_max", std::to_string(config.weak_shift_max));
  if (config.strong_magnitude >= 0.0) kv("strong_magnitude", format_double(config.strong_magnitude));
  if (config.strong_picks >= 0) kv("strong_picks", std::to_string(config.strong_picks));
  return out;
}

std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& config,
                                           std::uint64_t seed,
                                           std::vector<std::uint8_t>* flipped_out) {
  config.validate();
  Dataset train_set, test_set;
  if (config.source == DatasetSource::kBlobs) {
    const int classes = static_cast<int>(config.blob_counts.size());
    train_set = generate_blobs(classes, config.blob_counts, config.blob_dim,
                               config.blob_separation, seed, Split::kTrain);
    test_set = generate_blobs(classes, config.blob_test_counts, config.blob_dim,
                              config.blob_separation, seed ^ kTestSeedSalt, Split::kTest);
  } else if (config.source == DatasetSource::kCsv) {
    train_set = load_csv(config.csv_path, config.num_classes_override);
    test_set = load_csv(config.csv_test_path, config.num_classes_override);
    test_set.split = Split::kTest;
  } else {
    train_set = load_idx(config.idx_images, config.idx_labels, config.num_classes_override);
    test_set = load_idx(config.idx_test_images, config.idx_test_labels,
                        config.num_classes_override);
    test_set.split = Split::kTest;
  }

  if (config.noise_rate > 0.0) {
    NoiseSpec spec;
    spec.rate = config.noise_rate;
    spec.seed = seed ^ kNoiseSeedSalt;
    NoiseResult noisy = inject_noise(train_set, spec);
    train_set = std::move(noisy.dataset);
    if (flipped_out != nullptr) *flipped_out = std::move(noisy.flipped);
  } else if (flipped_out != nullptr) {
    flipped_out->assign(train_set.size(), 0);
  }
  return {std::move(train_set), std::move(test_set)};
}

AugmentationPolicy build_policy(const ExperimentConfig& config, const Dataset& dataset) {
  AugmentationPolicy policy = AugmentationPolicy::defaults_for(dataset);
  if (config.weak_jitter_sigma >= 0.0) policy.weak.jitter_sigma = config.weak_jitter_sigma;
  if (config.weak_flip_prob >= 0.0) policy.weak.flip_prob = config.weak_flip_prob;
  if (config.weak_shift_max >= 0) policy.weak.shift_max = config.weak_shift_max;
  if (config.strong_magnitude >= 0.0) policy.strong.magnitude = config.strong_magnitude;
  if (config.strong_picks >= 0) policy.strong.picks_per_sample = config.strong_picks;
  policy.validate();
  return policy;
}

std::string TrainSummary::to_json() const {
  ordered_json j;
  j["seeds"] = seeds;
  j["final_test_acc"]["values"] = final_test_accs;
  j["final_test_acc"]["mean"] = mean_test_acc;
  j["final_test_acc"]["std"] = std_test_acc;
  if (!final_memorization_rates.empty()) {
    const Stats s = mean_std(final_memorization_rates);
    j["final_memorization_rate"]["values"] = final_memorization_rates;
    j["final_memorization_rate"]["mean"] = s.mean;
    j["final_memorization_rate"]["std"] = s.stddev;
  }
  return j.dump(2) + "\n";
}

std::string SweepTable::to_csv() const {
  std::string out = parameter + ",mean_test_acc,std_test_acc\n";
  for (const Row& r : rows)
    out += format_double(r.value) + "," + format_double(r.mean_test_acc) + "," +
           format_double(r.std_test_acc) + "\n";
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + tmp + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError("short write to " + tmp);
  }
  fs::rename(tmp, path);
}

std::string resolve_output_dir(const ExperimentConfig& config, const std::string& auto_name) {
  if (!config.output_dir.empty()) return config.output_dir;
  const char* root = std::getenv("DNFER_OUT_ROOT");
  const std::string base = (root != nullptr && *root != '\0') ? root : "runs";
  return base + "/" + auto_name;
}

TrainSummary cmd_train(const ExperimentConfig& config) {
  config.validate();
  const std::string out_dir = resolve_output_dir(
      config, "train_" + mode_to_string(config.mode) + "_noise" +
                  format_double(config.noise_rate) + "_seed" +
                  std::to_string(config.train.seed));
  fs::create_directories(out_dir);
  write_file_atomic(out_dir + "/config.resolved", resolved_config_text(config));

  TrainSummary summary;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    const std::uint64_t seed = config.train.seed + r;
    SingleRun run = run_one(config, seed);
    write_run_artifacts(out_dir + "/run_" + std::to_string(seed), run,
                        config.noise_rate > 0.0);
    summary.seeds.push_back(seed);
    summary.final_test_accs.push_back(run.result.metrics.final_test_acc);
    const EpochRecord& last = run.result.metrics.epochs.back();
    if (last.memorization_rate)
      summary.final_memorization_rates.push_back(*last.memorization_rate);
  }
  const Stats s = mean_std(summary.final_test_accs);
  summary.mean_test_acc = s.mean;
  summary.std_test_acc = s.stddev;
  write_file_atomic(out_dir + "/summary.json", summary.to_json());
  return summary;
}

SweepTable cmd_ablate(const ExperimentConfig& config, const std::string& parameter,
                      const std::vector<double>& values) {
  config.validate();
  if (values.empty()) throw ConfigError("ablate: empty sweep value list");
  if (parameter != "alpha" && parameter != "warmup" && parameter != "noise")
    throw ConfigError("ablate: sweep must be alpha, warmup or noise");

  const std::string out_dir =
      resolve_output_dir(config, "ablate_" + parameter + "_seed" +
                                     std::to_string(config.train.seed));
  fs::create_directories(out_dir);
  write_file_atomic(out_dir + "/config.resolved", resolved_config_text(config));

  SweepTable table;
  table.parameter = parameter;
  for (double value : values) {
    ExperimentConfig point = config;
    point.output_dir = out_dir + "/" + parameter + "_" + format_double(value);
    if (parameter == "alpha") {
      point.train.alpha = value;
    } else if (parameter == "warmup") {
      if (value < 0.0 || value != std::floor(value))
        throw ConfigError("ablate: warmup values must be non-negative integers");
      point.train.warm_epochs = static_cast<std::size_t>(value);
    } else {
      point.noise_rate = value;
    }
    const TrainSummary summary = cmd_train(point);
    table.rows.push_back({value, summary.mean_test_acc, summary.std_test_acc});
  }
  write_file_atomic(out_dir + "/sweep.csv", table.to_csv());
  return table;
}

GapReport cmd_compare(const ExperimentConfig& config) {
  config.validate();
  if (config.noise_rate <= 0.0)
    std::cerr << "warning: compare with noise_rate 0, flipped-subset curves absent\n";
  const std::string out_dir = resolve_output_dir(
      config, "compare_noise" + format_double(config.noise_rate) + "_seed" +
                  std::to_string(config.train.seed));
  fs::create_directories(out_dir);
  write_file_atomic(out_dir + "/config.resolved", resolved_config_text(config));

  std::vector<GapReport> reports;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    const std::uint64_t seed = config.train.seed + r;
    ExperimentConfig base_cfg = config;
    base_cfg.mode = TrainMode::kBaseline;
    ExperimentConfig dnfer_cfg = config;
    dnfer_cfg.mode = TrainMode::kDnfer;

    SingleRun base_run = run_one(base_cfg, seed);
    SingleRun dnfer_run = run_one(dnfer_cfg, seed);
    write_run_artifacts(out_dir + "/baseline/run_" + std::to_string(seed), base_run,
                        config.noise_rate > 0.0);
    write_run_artifacts(out_dir + "/dnfer/run_" + std::to_string(seed), dnfer_run,
                        config.noise_rate > 0.0);

    if (config.noise_rate > 0.0) {
      GapReport report =
          memorization_trace(base_run.result.metrics, dnfer_run.result.metrics);
      write_file_atomic(out_dir + "/compare_seed" + std::to_string(seed) + ".csv",
                        report.to_csv());
      reports.push_back(std::move(report));
    } else {
      GapReport report;
      for (std::size_t e = 0; e < base_run.result.metrics.epochs.size(); ++e) {
        GapReport::Row row;
        row.epoch = e;
        row.baseline_test_acc = base_run.result.metrics.epochs[e].test_acc;
        row.treated_test_acc = dnfer_run.result.metrics.epochs[e].test_acc;
        report.rows.push_back(row);
      }
      write_file_atomic(out_dir + "/compare_seed" + std::to_string(seed) + ".csv",
                        report.to_csv());
      reports.push_back(std::move(report));
    }
  }

  // mean curves over seeds
  GapReport mean_report;
  const std::size_t epochs = reports.front().rows.size();
  for (std::size_t e = 0; e < epochs; ++e) {
    GapReport::Row row;
    row.epoch = reports.front().rows[e].epoch;
    for (const GapReport& rep : reports) {
      row.baseline_memorization += rep.rows[e].baseline_memorization;
      row.treated_memorization += rep.rows[e].treated_memorization;
      row.baseline_test_acc += rep.rows[e].baseline_test_acc;
      row.treated_test_acc += rep.rows[e].treated_test_acc;
    }
    const auto n = static_cast<double>(reports.size());
    row.baseline_memorization /= n;
    row.treated_memorization /= n;
    row.baseline_test_acc /= n;
    row.treated_test_acc /= n;
    mean_report.rows.push_back(row);
  }
  write_file_atomic(out_dir + "/compare.csv", mean_report.to_csv());
  return mean_report;
}

EvalResult cmd_eval(const std::string& checkpoint_path, const ExperimentConfig& config) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  std::pair<Dataset, Dataset> data = build_datasets(config, config.train.seed, nullptr);
  return evaluate(ckpt.model, data.second);
}

}  // namespace dnfer
