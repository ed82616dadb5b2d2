// Acceptance suite: every release gate in one binary, one printed line per
// criterion. Exits non-zero if any gate fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "dnfer/checkpoint.hpp"
#include "dnfer/experiment.hpp"
#include "dnfer/losses.hpp"
#include "dnfer/metrics.hpp"
#include "dnfer/mlp.hpp"
#include "dnfer/selection.hpp"
#include "dnfer/train.hpp"
#include "test_util.hpp"

using namespace dnfer;
namespace fs = std::filesystem;

namespace {

struct Gate {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<Gate> gates;

template <typename Fn>
void run_gate(const std::string& name, Fn body) {
  Gate gate;
  gate.name = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    gate.detail = body(gate.passed);
  } catch (const std::exception& e) {
    gate.passed = false;
    gate.detail = std::string("exception: ") + e.what();
  }
  gate.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("[%s] %s: %s (%.1fs)\n", gate.passed ? "PASS" : "FAIL", gate.name.c_str(),
              gate.detail.c_str(), gate.seconds);
  std::fflush(stdout);
  gates.push_back(std::move(gate));
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// The default desk-scale benchmark used by criteria 4-6.
ExperimentConfig benchmark_config(TrainMode mode, double noise_rate, std::uint64_t seed) {
  ExperimentConfig config;
  config.mode = mode;
  config.noise_rate = noise_rate;
  config.train.seed = seed;
  return config;
}

struct ModeOutcome {
  double mean_test_acc = 0.0;
  double mean_memorization = 0.0;
  std::vector<RunMetrics> metrics;
};

ModeOutcome run_mode(TrainMode mode, double noise_rate,
                     const std::vector<std::uint64_t>& seeds) {
  ModeOutcome outcome;
  for (std::uint64_t seed : seeds) {
    const ExperimentConfig config = benchmark_config(mode, noise_rate, seed);
    std::vector<std::uint8_t> flipped;
    const auto [train_set, test_set] = build_datasets(config, seed, &flipped);
    const AugmentationPolicy policy = build_policy(config, train_set);
    TrainConfig tc = config.train;
    tc.seed = seed;
    TrainResult result = train(train_set, test_set, tc, mode, &policy);
    outcome.mean_test_acc += result.metrics.final_test_acc;
    if (result.metrics.epochs.back().memorization_rate)
      outcome.mean_memorization += *result.metrics.epochs.back().memorization_rate;
    outcome.metrics.push_back(std::move(result.metrics));
  }
  const auto n = static_cast<double>(seeds.size());
  outcome.mean_test_acc /= n;
  outcome.mean_memorization /= n;
  return outcome;
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

// shared across criteria 4-6
ModeOutcome g_dnfer_noisy, g_baseline_noisy;

std::string criterion_equation_oracles(bool& passed) {
  Rng rng(9001);
  double worst = 0.0;
  int select_mismatches = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t batch = 1 + rng.below(32);
    const int classes = 2 + static_cast<int>(rng.below(7));
    const Matrix probs = testutil::random_posteriors(rng, batch, classes);
    const Matrix probs2 = testutil::random_posteriors(rng, batch, classes);
    const std::vector<int> labels = testutil::random_labels(rng, batch, classes);

    const CrossEntropyResult ce = cross_entropy(probs, labels);
    worst = std::max(worst, std::abs(ce.mean_loss - testutil::brute_ce_mean(probs, labels)));
    for (std::size_t i = 0; i < batch; ++i)
      worst = std::max(worst, std::abs(ce.per_sample[i] -
                                       testutil::brute_ce_sample(probs, i, labels[i])));

    worst = std::max(worst, std::abs(symmetric_kl(probs, probs2) -
                                     testutil::brute_sym_kl(probs, probs2)));

    const ThresholdVector t = compute_thresholds(probs, labels);
    const std::vector<double> bt =
        testutil::brute_thresholds(probs, labels, static_cast<std::size_t>(classes));
    for (std::size_t c = 0; c < bt.size(); ++c) {
      if (bt[c] < 0.0) continue;
      worst = std::max(worst, std::abs(*t.values[c] - bt[c]));
    }
    const SelectionMask mask = select_clean(probs, labels, t);
    const std::vector<std::uint8_t> bmask = testutil::brute_select(probs, labels, bt);
    for (std::size_t i = 0; i < batch; ++i)
      select_mismatches += (mask.flags[i] != bmask[i]);

    const double alpha = rng.uniform();
    const double sup = rng.uniform(0.0, 4.0), cons = rng.uniform(0.0, 4.0);
    worst = std::max(worst,
                     std::abs(total_loss(alpha, sup, cons) - (alpha * cons + (1 - alpha) * sup)));
  }
  passed = worst < 1e-9 && select_mismatches == 0;
  return "150 random batches, max |err| " + fmt(worst) + ", selection mismatches " +
         std::to_string(select_mismatches);
}

std::string criterion_gradients(bool& passed) {
  Rng rng(424242);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 1 + rng.below(3);       // <= 3
    const std::size_t hidden = 1 + rng.below(8);   // <= 8
    const std::size_t classes = 2 + rng.below(3);  // <= 4
    Rng init(rng.next_u64());
    const MlpModel model = MlpModel::init({in, hidden, classes}, init);
    const std::size_t batch = 1 + rng.below(16);
    Matrix weak(batch, in), strong(batch, in);
    for (std::size_t i = 0; i < weak.size(); ++i) weak.data()[i] = rng.normal();
    for (std::size_t i = 0; i < strong.size(); ++i) strong.data()[i] = rng.normal();
    const std::vector<int> labels =
        testutil::random_labels(rng, batch, static_cast<int>(classes));
    std::vector<std::uint8_t> selected(batch);
    for (auto& f : selected) f = rng.bernoulli(0.75) ? 1 : 0;

    for (double alpha : {0.0, 0.5, 1.0}) {
      const GradientSet analytic = backward(model, weak, strong, labels, selected, alpha);
      const GradientSet numeric = testutil::fd_gradient(model, [&](const MlpModel& m) {
        return combined_loss(m, weak, strong, labels, selected, alpha);
      });
      worst = std::max(worst, testutil::gradient_rel_error(analytic, numeric));
    }
  }
  passed = worst < 1e-4;
  return "20 random models x alpha {0, .5, 1}, worst rel err " + fmt(worst);
}

std::string criterion_selection_invariants(bool& passed) {
  Rng rng(31337);
  std::size_t violations = 0;
  const int batches = 1000;
  for (int trial = 0; trial < batches; ++trial) {
    const std::size_t batch = 1 + rng.below(40);
    const int classes = 2 + static_cast<int>(rng.below(7));
    const Matrix probs = testutil::random_posteriors(rng, batch, classes);
    const std::vector<int> labels = testutil::random_labels(rng, batch, classes);
    const ThresholdVector t = compute_thresholds(probs, labels);
    const SelectionMask mask = select_clean(probs, labels, t);

    std::vector<bool> present(static_cast<std::size_t>(classes), false);
    std::vector<bool> kept(static_cast<std::size_t>(classes), false);
    for (std::size_t i = 0; i < batch; ++i) {
      present[static_cast<std::size_t>(labels[i])] = true;
      if (mask.flags[i]) kept[static_cast<std::size_t>(labels[i])] = true;
    }
    for (std::size_t c = 0; c < present.size(); ++c) {
      if (present[c]) {
        if (!t.values[c] || !(*t.values[c] > 0.0 && *t.values[c] < 1.0)) ++violations;
        if (!kept[c]) ++violations;
      } else if (t.values[c]) {
        ++violations;
      }
    }
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < batch; ++j) {
        if (labels[i] != labels[j] || !mask.flags[i]) continue;
        const auto c = static_cast<std::size_t>(labels[i]);
        if (probs(j, c) > probs(i, c) && !mask.flags[j]) ++violations;
      }

    // permutation equivariance
    std::vector<std::size_t> perm(batch);
    for (std::size_t i = 0; i < batch; ++i) perm[i] = i;
    rng.shuffle(perm);
    Matrix probs_p(batch, static_cast<std::size_t>(classes));
    std::vector<int> labels_p(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      labels_p[i] = labels[perm[i]];
      for (std::size_t c = 0; c < probs.cols(); ++c) probs_p(i, c) = probs(perm[i], c);
    }
    const SelectionMask mask_p =
        select_clean(probs_p, labels_p, compute_thresholds(probs_p, labels_p));
    for (std::size_t i = 0; i < batch; ++i)
      if (mask_p.flags[i] != mask.flags[perm[i]]) ++violations;
  }
  passed = violations == 0;
  return std::to_string(batches) + " random batches, " + std::to_string(violations) +
         " violations";
}

std::string criterion_noise_robustness(bool& passed) {
  g_dnfer_noisy = run_mode(TrainMode::kDnfer, 0.3, kSeeds);
  g_baseline_noisy = run_mode(TrainMode::kBaseline, 0.3, kSeeds);
  const double acc_gap = g_dnfer_noisy.mean_test_acc - g_baseline_noisy.mean_test_acc;
  const double mem_gap =
      g_baseline_noisy.mean_memorization - g_dnfer_noisy.mean_memorization;
  passed = acc_gap >= 0.03 && mem_gap >= 0.10;
  return "test acc dnfer " + fmt(g_dnfer_noisy.mean_test_acc) + " vs baseline " +
         fmt(g_baseline_noisy.mean_test_acc) + " (gap " + fmt(acc_gap) +
         ", need >= 0.03); memorization baseline " +
         fmt(g_baseline_noisy.mean_memorization) + " vs dnfer " +
         fmt(g_dnfer_noisy.mean_memorization) + " (gap " + fmt(mem_gap) +
         ", need >= 0.10)";
}

std::string criterion_component_ablation(bool& passed) {
  const ModeOutcome sup_noisy = run_mode(TrainMode::kSupOnly, 0.3, kSeeds);
  const ModeOutcome cons_noisy = run_mode(TrainMode::kConsOnly, 0.3, kSeeds);

  const ModeOutcome dnfer_clean = run_mode(TrainMode::kDnfer, 0.0, kSeeds);
  const ModeOutcome base_clean = run_mode(TrainMode::kBaseline, 0.0, kSeeds);
  const ModeOutcome sup_clean = run_mode(TrainMode::kSupOnly, 0.0, kSeeds);
  const ModeOutcome cons_clean = run_mode(TrainMode::kConsOnly, 0.0, kSeeds);

  const bool noisy_ok = g_dnfer_noisy.mean_test_acc >= sup_noisy.mean_test_acc &&
                        g_dnfer_noisy.mean_test_acc >= cons_noisy.mean_test_acc;
  const double clean_max =
      std::max({dnfer_clean.mean_test_acc, base_clean.mean_test_acc,
                sup_clean.mean_test_acc, cons_clean.mean_test_acc});
  const double clean_min =
      std::min({dnfer_clean.mean_test_acc, base_clean.mean_test_acc,
                sup_clean.mean_test_acc, cons_clean.mean_test_acc});
  const bool clean_ok = (clean_max - clean_min) <= 0.03;
  passed = noisy_ok && clean_ok;
  return "30% noise: dnfer " + fmt(g_dnfer_noisy.mean_test_acc) + ", sup-only " +
         fmt(sup_noisy.mean_test_acc) + ", cons-only " + fmt(cons_noisy.mean_test_acc) +
         "; 0% noise spread " + fmt(clean_max - clean_min) + " (need <= 0.03)";
}

std::string criterion_schedule_and_precision(bool& passed) {
  bool schedule_ok = true;
  double precision_sum = 0.0;
  std::size_t precision_runs = 0;
  for (const RunMetrics& metrics : g_dnfer_noisy.metrics) {
    double run_precision = 0.0;
    std::size_t post_warm = 0;
    for (const EpochRecord& er : metrics.epochs) {
      const double expected = er.epoch < 5 ? 0.0 : 0.5;
      if (er.alpha != expected) schedule_ok = false;
      if (er.epoch >= 5 && er.selection_precision) {
        run_precision += *er.selection_precision;
        ++post_warm;
      }
    }
    if (post_warm > 0) {
      precision_sum += run_precision / static_cast<double>(post_warm);
      ++precision_runs;
    }
  }
  const double mean_precision =
      precision_runs > 0 ? precision_sum / static_cast<double>(precision_runs) : 0.0;
  passed = schedule_ok && mean_precision > 0.70;
  return std::string("alpha schedule ") + (schedule_ok ? "exact" : "WRONG") +
         "; post-warm-up selection precision " + fmt(mean_precision) +
         " (clean prior 0.70)";
}

std::string criterion_determinism_and_formats(bool& passed) {
  const std::string dir = (fs::temp_directory_path() / "dnfer_acceptance").string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool ok = true;
  std::string notes;

  // byte-identical reruns
  {
    ExperimentConfig config = benchmark_config(TrainMode::kDnfer, 0.2, 7);
    config.train.max_epochs = 8;
    config.train.warm_epochs = 3;
    config.blob_counts = {60, 30, 10};
    config.blob_test_counts = {20, 20, 20};
    std::vector<std::uint8_t> flipped;
    const auto [train_set, test_set] = build_datasets(config, 7, &flipped);
    const TrainResult a = train(train_set, test_set, config.train);
    const TrainResult b = train(train_set, test_set, config.train);
    const bool identical = a.metrics.to_jsonl() == b.metrics.to_jsonl();
    ok = ok && identical;
    notes += std::string("metrics rerun ") + (identical ? "identical" : "DIFFER");

    // checkpoint round-trip preserves evaluation exactly
    const std::string ckpt = dir + "/model.bin";
    save_checkpoint(ckpt, a.model, &a.opt_state);
    const Checkpoint loaded = load_checkpoint(ckpt);
    const double acc_orig = evaluate(a.model, test_set).accuracy;
    const double acc_loaded = evaluate(loaded.model, test_set).accuracy;
    const bool round_trip = acc_orig == acc_loaded;
    ok = ok && round_trip;
    notes += std::string("; checkpoint round-trip ") + (round_trip ? "exact" : "DRIFTS");
  }

  // CSV fixture
  {
    const std::string csv = dir + "/fixture.csv";
    std::ofstream out(csv);
    out << "feature_0,feature_1,label,true_label\n";
    out << "0.5,-1.25,0,0\n1.5,2.5,1,1\n-0.5,0.25,2,1\n";
    out.close();
    const Dataset ds = load_csv(csv);
    const bool csv_ok = ds.size() == 3 && ds.num_classes == 3 &&
                        ds.samples[0].features == std::vector<double>{0.5, -1.25} &&
                        *ds.samples[2].true_label == 1;
    ok = ok && csv_ok;
    notes += std::string("; csv fixture ") + (csv_ok ? "parses" : "BROKEN");
  }

  // IDX fixture
  {
    const std::string img_path = dir + "/fixture.idx3";
    const std::string lbl_path = dir + "/fixture.idx1";
    const auto be = [](std::ofstream& o, std::uint32_t v) {
      const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
      o.write(reinterpret_cast<const char*>(b), 4);
    };
    {
      std::ofstream img(img_path, std::ios::binary);
      be(img, 0x00000803u);
      be(img, 2);
      be(img, 2);
      be(img, 2);
      const unsigned char px[8] = {0, 255, 128, 64, 255, 0, 0, 255};
      img.write(reinterpret_cast<const char*>(px), 8);
      std::ofstream lbl(lbl_path, std::ios::binary);
      be(lbl, 0x00000801u);
      be(lbl, 2);
      const unsigned char ys[2] = {0, 1};
      lbl.write(reinterpret_cast<const char*>(ys), 2);
    }
    const Dataset ds = load_idx(img_path, lbl_path);
    const bool idx_ok = ds.size() == 2 && ds.image_height == 2 && ds.image_width == 2 &&
                        ds.samples[0].features[1] == 1.0 &&
                        ds.samples[1].observed_label == 1;
    ok = ok && idx_ok;
    notes += std::string("; idx fixture ") + (idx_ok ? "parses" : "BROKEN");
  }

  fs::remove_all(dir);
  passed = ok;
  return notes;
}

std::string criterion_defaults(bool& passed) {
  bool ok = true;
  ok = ok && lr_schedule(0.001, 0) == 0.001;
  ok = ok && std::abs(lr_schedule(0.001, 1) - 0.00095) < 1e-15;
  ok = ok && std::abs(lr_schedule(0.001, 2) - 0.0009025) < 1e-15;
  ok = ok && std::abs(lr_schedule(0.001, 10) - 0.001 * std::pow(0.95, 10.0)) < 1e-18;
  const TrainConfig config;
  ok = ok && config.batch_size == 128;
  ok = ok && config.warm_epochs == 5;
  ok = ok && config.alpha == 0.5;
  ok = ok && config.initial_lr == 0.001;
  ok = ok && config.lr_decay == 0.95;
  passed = ok;
  return "lr schedule 0.001 * 0.95^e; defaults batch 128, warm-up 5, alpha 0.5";
}

}  // namespace

int main() {
  std::printf("DNFER acceptance suite\n");
  run_gate("1. equation oracles", criterion_equation_oracles);
  run_gate("2. gradient correctness", criterion_gradients);
  run_gate("3. selection invariants", criterion_selection_invariants);
  run_gate("4. noise-robustness direction", criterion_noise_robustness);
  run_gate("5. component ablation direction", criterion_component_ablation);
  run_gate("6. schedule and selection precision", criterion_schedule_and_precision);
  run_gate("7. determinism and formats", criterion_determinism_and_formats);
  run_gate("8. hyperparameter defaults", criterion_defaults);

  std::size_t failed = 0;
  for (const Gate& g : gates) failed += g.passed ? 0 : 1;
  std::printf("%zu/%zu criteria passed\n", gates.size() - failed, gates.size());
  return failed == 0 ? 0 : 1;
}
