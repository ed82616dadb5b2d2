#include "dnfer/adam.hpp"

#include <cmath>
#include <string>

#include "dnfer/error.hpp"

namespace dnfer {

namespace {

void update_span(double* params, const double* grads, double* m, double* v,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace

AdamState make_adam_state(const MlpModel& model) {
  AdamState state;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    state.m_weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
    state.v_weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
    state.m_biases.emplace_back(model.biases[l].size(), 0.0);
    state.v_biases.emplace_back(model.biases[l].size(), 0.0);
  }
  return state;
}

void adam_step(MlpModel& model, const GradientSet& grads, AdamState& state,
               double lr) {
  if (lr <= 0.0) throw ConfigError("adam_step: lr must be positive");
  if (grads.weights.size() != model.num_layers() ||
      state.m_weights.size() != model.num_layers())
    throw ConfigError("adam_step: layer count mismatch");
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    if (!grads.weights[l].same_shape(model.weights[l]) ||
        grads.biases[l].size() != model.biases[l].size() ||
        !state.m_weights[l].same_shape(model.weights[l]))
      throw ConfigError("adam_step: shape mismatch at layer " + std::to_string(l));
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    update_span(model.weights[l].data(), grads.weights[l].data(),
                state.m_weights[l].data(), state.v_weights[l].data(),
                model.weights[l].size(), lr, state.beta1, state.beta2,
                state.epsilon, bc1, bc2);
    update_span(model.biases[l].data(), grads.biases[l].data(),
                state.m_biases[l].data(), state.v_biases[l].data(),
                model.biases[l].size(), lr, state.beta1, state.beta2,
                state.epsilon, bc1, bc2);
  }
}

double lr_schedule(double initial_lr, std::size_t epoch) {
  if (initial_lr <= 0.0) throw ConfigError("lr_schedule: initial_lr must be positive");
  return initial_lr * std::pow(0.95, static_cast<double>(epoch));
}

}  // namespace dnfer
