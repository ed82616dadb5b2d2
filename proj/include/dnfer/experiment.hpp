#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dnfer/dataset.hpp"
#include "dnfer/metrics.hpp"
#include "dnfer/train.hpp"

namespace dnfer {

enum class DatasetSource { kBlobs, kCsv, kIdx };

// Resolved experiment description: everything a command needs, assembled from
// defaults, an optional flat key=value config file, and CLI flag overrides.
struct ExperimentConfig {
  TrainConfig train;
  TrainMode mode = TrainMode::kDnfer;

  DatasetSource source = DatasetSource::kBlobs;
  std::vector<std::size_t> blob_counts = {600, 300, 100};
  std::vector<std::size_t> blob_test_counts = {100, 100, 100};
  std::size_t blob_dim = 64;
  double blob_separation = 7.0;
  std::string csv_path;
  std::string csv_test_path;
  std::string idx_images, idx_labels;
  std::string idx_test_images, idx_test_labels;
  int num_classes_override = 0;

  double noise_rate = 0.0;
  std::size_t repeats = 1;
  std::string output_dir;  // empty -> $DNFER_OUT_ROOT or "runs", plus an auto name

  // augmentation overrides; negative values keep dataset defaults
  double weak_jitter_sigma = -1.0;
  double weak_flip_prob = -1.0;
  int weak_shift_max = -1;
  double strong_magnitude = -1.0;
  int strong_picks = -1;

  void validate() const;
};

TrainMode mode_from_string(const std::string& name);
std::string mode_to_string(TrainMode mode);
SelectionView selection_view_from_string(const std::string& name);

// One "key = value" pair per line, '#' comments. Unknown keys are errors.
void apply_config_file(ExperimentConfig& config, const std::string& path);
void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value);
std::string resolved_config_text(const ExperimentConfig& config);

// Train/test pair for one run seed. Blobs are drawn from the seed; file
// sources are loaded as-is. Noise is injected into the train split at
// config.noise_rate; flipped_out receives the per-sample mask (all zero when
// the rate is 0).
std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& config,
                                           std::uint64_t seed,
                                           std::vector<std::uint8_t>* flipped_out);

// Augmentation policy for a dataset with the config's overrides applied.
AugmentationPolicy build_policy(const ExperimentConfig& config, const Dataset& dataset);

struct TrainSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_test_accs;
  std::vector<double> final_memorization_rates;  // empty when untracked
  double mean_test_acc = 0.0;
  double std_test_acc = 0.0;

  std::string to_json() const;
};

struct SweepTable {
  std::string parameter;
  struct Row {
    double value = 0.0;
    double mean_test_acc = 0.0;
    double std_test_acc = 0.0;
  };
  std::vector<Row> rows;

  std::string to_csv() const;
};

// Runs config.repeats seeded trainings (seed, seed+1, ...) and writes
// metrics.jsonl, checkpoint.bin, confusion.csv and noise_mask.csv per run,
// plus config.resolved and summary.json. Returns the summary.
TrainSummary cmd_train(const ExperimentConfig& config);

// Re-runs cmd_train per swept value (parameter in {alpha, warmup, noise});
// writes sweep.csv at the experiment root.
SweepTable cmd_ablate(const ExperimentConfig& config, const std::string& parameter,
                      const std::vector<double>& values);

// Baseline and dnfer over shared seeds and shared noisy datasets; writes
// per-seed paired curves and their mean as compare.csv. Returns the mean
// report.
GapReport cmd_compare(const ExperimentConfig& config);

// Checkpoint + dataset -> metrics (no training).
EvalResult cmd_eval(const std::string& checkpoint_path, const ExperimentConfig& config);

// Temp-file-then-rename write; partial files never appear under their final
// name.
void write_file_atomic(const std::string& path, const std::string& content);

// Output root resolution: config.output_dir, else $DNFER_OUT_ROOT/<auto>,
// else runs/<auto>.
std::string resolve_output_dir(const ExperimentConfig& config, const std::string& auto_name);

}  // namespace dnfer
