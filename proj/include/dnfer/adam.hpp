#pragma once

#include <cstdint>
#include <vector>

#include "dnfer/matrix.hpp"
#include "dnfer/mlp.hpp"

namespace dnfer {

// Optimizer moments, shapes mirroring the model they update.
struct AdamState {
  std::vector<Matrix> m_weights;
  std::vector<Matrix> v_weights;
  std::vector<std::vector<double>> m_biases;
  std::vector<std::vector<double>> v_biases;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam_state(const MlpModel& model);

// One bias-corrected Adam update in place; increments step_count.
void adam_step(MlpModel& model, const GradientSet& grads, AdamState& state,
               double lr);

// initial_lr * 0.95^epoch.
double lr_schedule(double initial_lr, std::size_t epoch);

}  // namespace dnfer
