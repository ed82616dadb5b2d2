#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dnfer/error.hpp"
#include "dnfer/experiment.hpp"
#include "dnfer/text.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::string mode;
  double noise_rate = -1.0;
  double alpha = -1.0;
  long long warm_epochs = -1;
  long long epochs = -1;
  long long batch_size = -1;
  double lr = -1.0;
  long long seed = -1;
  long long repeats = -1;
  std::string out_dir;
  bool use_blobs = false;
  std::string csv_path, csv_test_path;
  std::string idx_images, idx_labels, idx_test_images, idx_test_labels;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "key = value config file");
  cmd->add_option("--mode", o.mode, "dnfer | baseline | sup-only | cons-only");
  cmd->add_option("--noise-rate", o.noise_rate, "symmetric label-flip rate in [0,1]");
  cmd->add_option("--alpha", o.alpha, "consistency weight in [0,1]");
  cmd->add_option("--warm-epochs", o.warm_epochs, "warm-up epochs");
  cmd->add_option("--epochs", o.epochs, "total epochs");
  cmd->add_option("--batch-size", o.batch_size, "mini-batch size");
  cmd->add_option("--lr", o.lr, "initial learning rate");
  cmd->add_option("--seed", o.seed, "base seed; repeats use seed, seed+1, ...");
  cmd->add_option("--repeats", o.repeats, "number of seeded repeats");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_flag("--blobs", o.use_blobs, "use the synthetic blobs benchmark");
  cmd->add_option("--csv", o.csv_path, "train CSV path");
  cmd->add_option("--csv-test", o.csv_test_path, "test CSV path");
  cmd->add_option("--idx-images", o.idx_images, "train IDX3 image file");
  cmd->add_option("--idx-labels", o.idx_labels, "train IDX1 label file");
  cmd->add_option("--idx-test-images", o.idx_test_images, "test IDX3 image file");
  cmd->add_option("--idx-test-labels", o.idx_test_labels, "test IDX1 label file");
}

dnfer::ExperimentConfig resolve(const CliOverrides& o) {
  dnfer::ExperimentConfig config;
  if (!o.config_path.empty()) dnfer::apply_config_file(config, o.config_path);
  // flags win over file values
  if (!o.mode.empty()) config.mode = dnfer::mode_from_string(o.mode);
  if (o.noise_rate >= 0.0) config.noise_rate = o.noise_rate;
  if (o.alpha >= 0.0) config.train.alpha = o.alpha;
  if (o.warm_epochs >= 0) config.train.warm_epochs = static_cast<std::size_t>(o.warm_epochs);
  if (o.epochs >= 0) config.train.max_epochs = static_cast<std::size_t>(o.epochs);
  if (o.batch_size >= 0) config.train.batch_size = static_cast<std::size_t>(o.batch_size);
  if (o.lr >= 0.0) config.train.initial_lr = o.lr;
  if (o.seed >= 0) config.train.seed = static_cast<std::uint64_t>(o.seed);
  if (o.repeats >= 0) config.repeats = static_cast<std::size_t>(o.repeats);
  if (!o.out_dir.empty()) config.output_dir = o.out_dir;
  if (o.use_blobs) config.source = dnfer::DatasetSource::kBlobs;
  if (!o.csv_path.empty()) {
    config.source = dnfer::DatasetSource::kCsv;
    config.csv_path = o.csv_path;
  }
  if (!o.csv_test_path.empty()) config.csv_test_path = o.csv_test_path;
  if (!o.idx_images.empty()) {
    config.source = dnfer::DatasetSource::kIdx;
    config.idx_images = o.idx_images;
  }
  if (!o.idx_labels.empty()) config.idx_labels = o.idx_labels;
  if (!o.idx_test_images.empty()) config.idx_test_images = o.idx_test_images;
  if (!o.idx_test_labels.empty()) config.idx_test_labels = o.idx_test_labels;
  return config;
}

int run(int argc, char** argv) {
  CLI::App app{"DNFER noisy-label training experiments"};
  app.require_subcommand(1);

  CliOverrides train_opts;
  CLI::App* train_cmd = app.add_subcommand("train", "train one mode, repeats seeds");
  add_common_options(train_cmd, train_opts);

  CliOverrides ablate_opts;
  std::string sweep;
  std::vector<double> sweep_values;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "sweep alpha, warmup or noise");
  add_common_options(ablate_cmd, ablate_opts);
  ablate_cmd->add_option("--sweep", sweep, "alpha | warmup | noise")->required();
  ablate_cmd->add_option("--values", sweep_values, "swept values")
      ->required()
      ->delimiter(',');

  CliOverrides compare_opts;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "baseline vs dnfer memorization curves");
  add_common_options(compare_cmd, compare_opts);

  CliOverrides eval_opts;
  std::string checkpoint_path;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test set");
  add_common_options(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (train_cmd->parsed()) {
    const dnfer::TrainSummary summary = dnfer::cmd_train(resolve(train_opts));
    std::cout << "final test accuracy: mean " << dnfer::format_double(summary.mean_test_acc)
              << " std " << dnfer::format_double(summary.std_test_acc) << " over "
              << summary.seeds.size() << " seed(s)\n";
  } else if (ablate_cmd->parsed()) {
    const dnfer::SweepTable table =
        dnfer::cmd_ablate(resolve(ablate_opts), sweep, sweep_values);
    std::cout << table.to_csv();
  } else if (compare_cmd->parsed()) {
    const dnfer::GapReport report = dnfer::cmd_compare(resolve(compare_opts));
    std::cout << report.to_table();
  } else if (eval_cmd->parsed()) {
    const dnfer::EvalResult result =
        dnfer::cmd_eval(checkpoint_path, resolve(eval_opts));
    std::cout << "accuracy: " << dnfer::format_double(result.accuracy) << "\n";
    std::cout << "per-class accuracy:";
    for (double a : result.per_class_accuracy) std::cout << " " << dnfer::format_double(a);
    std::cout << "\n" << result.confusion.to_table();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dnfer::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n"
              << "usage: dnfer {train|ablate|compare|eval} [--config PATH] [--mode "
                 "dnfer|baseline|sup-only|cons-only] [options]\n"
              << "run 'dnfer --help' for the full flag list\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
