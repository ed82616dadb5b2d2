#pragma once

// Shared fixtures and independent brute-force oracles for the test suites.
// Everything here recomputes results from first principles and must stay
// independent of the library implementation paths it checks.

#include <cmath>
#include <vector>

#include "dnfer/matrix.hpp"
#include "dnfer/mlp.hpp"
#include "dnfer/rng.hpp"
#include "dnfer/selection.hpp"

namespace testutil {

inline dnfer::Matrix matrix_from(const std::vector<std::vector<double>>& rows) {
  dnfer::Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

// Random distribution rows: positive entries normalized to sum 1.
inline dnfer::Matrix random_posteriors(dnfer::Rng& rng, std::size_t batch,
                                       std::size_t classes) {
  dnfer::Matrix m(batch, classes);
  for (std::size_t i = 0; i < batch; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      m(i, c) = 0.01 + rng.uniform();
      sum += m(i, c);
    }
    for (std::size_t c = 0; c < classes; ++c) m(i, c) /= sum;
  }
  return m;
}

inline std::vector<int> random_labels(dnfer::Rng& rng, std::size_t batch, int classes) {
  std::vector<int> labels(batch);
  for (auto& y : labels)
    y = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return labels;
}

// --- brute-force references ---

inline double brute_ce_sample(const dnfer::Matrix& probs, std::size_t row, int label) {
  const double p = probs(row, static_cast<std::size_t>(label));
  return -std::log(p > 1e-12 ? p : 1e-12);
}

inline double brute_ce_mean(const dnfer::Matrix& probs, const std::vector<int>& labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum += brute_ce_sample(probs, i, labels[i]);
  return sum / static_cast<double>(labels.size());
}

// Literal two-directional sum, one KL term at a time.
inline double brute_sym_kl(const dnfer::Matrix& p, const dnfer::Matrix& q) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double d_pq = 0.0, d_qp = 0.0;
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const double pc = p(i, c) > 1e-12 ? p(i, c) : 1e-12;
      const double qc = q(i, c) > 1e-12 ? q(i, c) : 1e-12;
      d_pq += p(i, c) * std::log(pc / qc);
      d_qp += q(i, c) * std::log(qc / pc);
    }
    total += d_pq + d_qp;
  }
  return total / static_cast<double>(p.rows());
}

inline std::vector<double> brute_thresholds(const dnfer::Matrix& probs,
                                            const std::vector<int>& labels,
                                            std::size_t classes) {
  std::vector<double> out(classes, -1.0);  // -1 marks an absent class
  for (std::size_t c = 0; c < classes; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (static_cast<std::size_t>(labels[i]) != c) continue;
      sum += probs(i, c);
      ++count;
    }
    if (count > 0) out[c] = sum / static_cast<double>(count);
  }
  return out;
}

inline std::vector<std::uint8_t> brute_select(const dnfer::Matrix& probs,
                                              const std::vector<int>& labels,
                                              const std::vector<double>& thresholds) {
  std::vector<std::uint8_t> flags(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    flags[i] = probs(i, y) >= thresholds[y] ? 1 : 0;
  }
  return flags;
}

// Central finite differences of an arbitrary scalar function of the model
// parameters, h = 1e-5.
template <typename LossFn>
dnfer::GradientSet fd_gradient(const dnfer::MlpModel& model, LossFn loss) {
  constexpr double h = 1e-5;
  dnfer::MlpModel probe = model;
  dnfer::GradientSet grads = dnfer::GradientSet::zeros_like(model);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
      const double original = probe.weights[l].data()[i];
      probe.weights[l].data()[i] = original + h;
      const double up = loss(probe);
      probe.weights[l].data()[i] = original - h;
      const double down = loss(probe);
      probe.weights[l].data()[i] = original;
      grads.weights[l].data()[i] = (up - down) / (2.0 * h);
    }
    for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
      const double original = probe.biases[l][i];
      probe.biases[l][i] = original + h;
      const double up = loss(probe);
      probe.biases[l][i] = original - h;
      const double down = loss(probe);
      probe.biases[l][i] = original;
      grads.biases[l][i] = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

// Gradient-check ratio with a floor on the denominator so finite-difference
// roundoff on near-zero entries does not read as a relative error.
inline double gradient_rel_error(const dnfer::GradientSet& analytic,
                                 const dnfer::GradientSet& numeric) {
  double worst = 0.0;
  const auto compare = [&worst](double a, double n) {
    const double denom = std::max({std::abs(a), std::abs(n), 1e-4});
    worst = std::max(worst, std::abs(a - n) / denom);
  };
  for (std::size_t l = 0; l < analytic.weights.size(); ++l) {
    for (std::size_t i = 0; i < analytic.weights[l].size(); ++i)
      compare(analytic.weights[l].data()[i], numeric.weights[l].data()[i]);
    for (std::size_t i = 0; i < analytic.biases[l].size(); ++i)
      compare(analytic.biases[l][i], numeric.biases[l][i]);
  }
  return worst;
}

}  // namespace testutil
