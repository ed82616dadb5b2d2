#include "dnfer/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dnfer/error.hpp"

namespace dnfer {

namespace {

constexpr double kProbFloor = 1e-12;

struct ForwardTrace {
  std::vector<Matrix> layer_inputs;     // input to each affine layer
  std::vector<Matrix> pre_activations;  // hidden-layer z, for the ReLU gate
  Matrix probs;
};

void check_finite(const Matrix& m, std::size_t layer) {
  if (!m.all_finite())
    throw NumericError("non-finite intermediate at layer " + std::to_string(layer));
}

// z = x * W^T + b
Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  const std::size_t batch = x.rows(), in = x.cols(), out = w.rows();
  Matrix z(batch, out);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* xi = x.row(i);
    double* zi = z.row(i);
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.row(o);
      double acc = b[o];
      for (std::size_t k = 0; k < in; ++k) acc += wo[k] * xi[k];
      zi[o] = acc;
    }
  }
  return z;
}

void softmax_rows_inplace(Matrix& z) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double* row = z.row(i);
    double mx = row[0];
    for (std::size_t c = 1; c < z.cols(); ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < z.cols(); ++c) row[c] /= sum;
  }
}

ForwardTrace forward_trace(const MlpModel& model, const Matrix& inputs) {
  model.validate();
  if (inputs.cols() != model.input_dim())
    throw ConfigError("forward: input has " + std::to_string(inputs.cols()) +
                      " columns, model expects " + std::to_string(model.input_dim()));
  if (!inputs.all_finite()) throw InputError("forward: non-finite input");

  ForwardTrace trace;
  Matrix a = inputs;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    trace.layer_inputs.push_back(a);
    Matrix z = affine(a, model.weights[l], model.biases[l]);
    check_finite(z, l);
    if (l + 1 < model.num_layers()) {
      trace.pre_activations.push_back(z);
      for (std::size_t i = 0; i < z.size(); ++i)
        z.data()[i] = std::max(0.0, z.data()[i]);
      a = std::move(z);
    } else {
      softmax_rows_inplace(z);
      trace.probs = std::move(z);
    }
  }
  return trace;
}

// Backpropagate delta (dL/dlogits) through the stack, accumulating into grads.
void accumulate_backward(const MlpModel& model, const ForwardTrace& trace,
                         Matrix delta, GradientSet& grads) {
  const std::size_t batch = delta.rows();
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    const Matrix& input = trace.layer_inputs[l];
    Matrix& gw = grads.weights[l];
    std::vector<double>& gb = grads.biases[l];
    const std::size_t out = gw.rows(), in = gw.cols();
    for (std::size_t i = 0; i < batch; ++i) {
      const double* di = delta.row(i);
      const double* xi = input.row(i);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = di[o];
        if (d == 0.0) continue;
        double* gwo = gw.row(o);
        for (std::size_t k = 0; k < in; ++k) gwo[k] += d * xi[k];
        gb[o] += d;
      }
    }
    if (l == 0) break;
    const Matrix& w = model.weights[l];
    const Matrix& z = trace.pre_activations[l - 1];
    Matrix prev(batch, in);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* di = delta.row(i);
      const double* zi = z.row(i);
      double* pi = prev.row(i);
      for (std::size_t k = 0; k < in; ++k) {
        if (zi[k] <= 0.0) continue;  // ReLU gate
        double acc = 0.0;
        for (std::size_t o = 0; o < out; ++o) acc += di[o] * w(o, k);
        pi[k] = acc;
      }
    }
    check_finite(prev, l - 1);
    delta = std::move(prev);
  }
}

std::size_t count_selected(const std::vector<std::uint8_t>& selected) {
  std::size_t n = 0;
  for (auto f : selected) n += (f != 0);
  return n;
}

// Mean CE over selected rows and, if delta != nullptr, its scaled gradient at
// the logits added into *delta.
double ce_term(const Matrix& probs, const std::vector<int>& labels,
               const std::vector<std::uint8_t>& selected, double scale,
               Matrix* delta) {
  const std::size_t m = count_selected(selected);
  if (m == 0) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!selected[i]) continue;
    const double py = probs(i, static_cast<std::size_t>(labels[i]));
    loss += -std::log(std::max(py, kProbFloor));
    if (delta != nullptr && py > kProbFloor) {
      const double w = scale / static_cast<double>(m);
      for (std::size_t c = 0; c < probs.cols(); ++c)
        (*delta)(i, c) += w * probs(i, c);
      (*delta)(i, static_cast<std::size_t>(labels[i])) -= w;
    }
  }
  return loss / static_cast<double>(m);
}

// Mean over rows of D_KL(p||q) + D_KL(q||p), arguments floored inside the log
// ratio. Optionally accumulates the scaled gradients at both views' logits.
double sym_kl_term(const Matrix& p, const Matrix& q, double scale,
                   Matrix* delta_p, Matrix* delta_q) {
  const std::size_t batch = p.rows(), classes = p.cols();
  const double w = scale / static_cast<double>(batch);
  double total = 0.0;
  std::vector<double> gp(classes), gq(classes);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* pi = p.row(i);
    const double* qi = q.row(i);
    double row_loss = 0.0, dot_p = 0.0, dot_q = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double lr = std::log(std::max(pi[c], kProbFloor)) -
                        std::log(std::max(qi[c], kProbFloor));
      row_loss += (pi[c] - qi[c]) * lr;
      gp[c] = lr + (pi[c] > kProbFloor ? 1.0 - qi[c] / pi[c] : 0.0);
      gq[c] = -lr + (qi[c] > kProbFloor ? 1.0 - pi[c] / qi[c] : 0.0);
      dot_p += gp[c] * pi[c];
      dot_q += gq[c] * qi[c];
    }
    total += row_loss;
    if (delta_p != nullptr) {
      for (std::size_t c = 0; c < classes; ++c) {
        (*delta_p)(i, c) += w * pi[c] * (gp[c] - dot_p);
        (*delta_q)(i, c) += w * qi[c] * (gq[c] - dot_q);
      }
    }
  }
  return total / static_cast<double>(batch);
}

void validate_batch(const Matrix& weak, const Matrix& strong,
                    const std::vector<int>& labels,
                    const std::vector<std::uint8_t>& selected,
                    std::size_t num_classes, double alpha) {
  if (!weak.same_shape(strong)) throw InputError("weak/strong view shape mismatch");
  if (labels.size() != weak.rows() || selected.size() != weak.rows())
    throw InputError("labels/selection length does not match batch size");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0,1]");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw InputError("label " + std::to_string(y) + " out of range");
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_layers(); ++l)
    n += weights[l].size() + biases[l].size();
  return n;
}

MlpModel MlpModel::init(const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("model needs at least input and output dims");
  for (std::size_t d : dims)
    if (d == 0) throw ConfigError("layer dims must be positive");
  MlpModel model;
  model.layer_dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (std::size_t r = 0; r < fan_out; ++r)
      for (std::size_t c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

void MlpModel::validate() const {
  if (layer_dims.size() < 2 || weights.size() != layer_dims.size() - 1 ||
      biases.size() != weights.size())
    throw ConfigError("model: layer bookkeeping inconsistent");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l])
      throw ConfigError("model: weight " + std::to_string(l) + " has wrong shape");
    if (biases[l].size() != layer_dims[l + 1])
      throw ConfigError("model: bias " + std::to_string(l) + " has wrong length");
    if (!weights[l].all_finite())
      throw ConfigError("model: non-finite weight in layer " + std::to_string(l));
    for (double b : biases[l])
      if (!std::isfinite(b))
        throw ConfigError("model: non-finite bias in layer " + std::to_string(l));
  }
}

GradientSet GradientSet::zeros_like(const MlpModel& model) {
  GradientSet g;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    g.weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
    g.biases.emplace_back(model.biases[l].size(), 0.0);
  }
  return g;
}

Matrix forward(const MlpModel& model, const Matrix& inputs) {
  return forward_trace(model, inputs).probs;
}

GradientSet ce_backward(const MlpModel& model, const Matrix& inputs,
                        const std::vector<int>& labels) {
  const std::vector<std::uint8_t> all(inputs.rows(), 1);
  validate_batch(inputs, inputs, labels, all, model.num_classes(), 0.0);
  ForwardTrace trace = forward_trace(model, inputs);
  Matrix delta(trace.probs.rows(), trace.probs.cols());
  GradientSet grads = GradientSet::zeros_like(model);
  grads.loss = ce_term(trace.probs, labels, all, 1.0, &delta);
  accumulate_backward(model, trace, std::move(delta), grads);
  return grads;
}

double combined_loss(const MlpModel& model, const Matrix& weak,
                     const Matrix& strong, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& selected, double alpha) {
  validate_batch(weak, strong, labels, selected, model.num_classes(), alpha);
  const Matrix p_w = forward(model, weak);
  const Matrix p_s = forward(model, strong);
  const double l_sup = ce_term(p_w, labels, selected, 0.0, nullptr) +
                       ce_term(p_s, labels, selected, 0.0, nullptr);
  const double l_cons = sym_kl_term(p_s, p_w, 0.0, nullptr, nullptr);
  return alpha * l_cons + (1.0 - alpha) * l_sup;
}

GradientSet backward(const MlpModel& model, const Matrix& weak,
                     const Matrix& strong, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& selected, double alpha) {
  validate_batch(weak, strong, labels, selected, model.num_classes(), alpha);
  ForwardTrace trace_w = forward_trace(model, weak);
  ForwardTrace trace_s = forward_trace(model, strong);

  Matrix delta_w(trace_w.probs.rows(), trace_w.probs.cols());
  Matrix delta_s(trace_s.probs.rows(), trace_s.probs.cols());

  const double sup_w = ce_term(trace_w.probs, labels, selected, 1.0 - alpha, &delta_w);
  const double sup_s = ce_term(trace_s.probs, labels, selected, 1.0 - alpha, &delta_s);
  const double cons = sym_kl_term(trace_s.probs, trace_w.probs, alpha, &delta_s, &delta_w);

  GradientSet grads = GradientSet::zeros_like(model);
  grads.loss = alpha * cons + (1.0 - alpha) * (sup_w + sup_s);
  accumulate_backward(model, trace_w, std::move(delta_w), grads);
  accumulate_backward(model, trace_s, std::move(delta_s), grads);
  return grads;
}

}  // namespace dnfer
