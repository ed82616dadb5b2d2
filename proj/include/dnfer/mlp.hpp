#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dnfer/matrix.hpp"
#include "dnfer/rng.hpp"

namespace dnfer {

// Fully connected ReLU network with a softmax head. layer_dims is
// (input_dim, hidden..., num_classes); weights[l] maps layer l to l+1 and has
// shape (layer_dims[l+1] x layer_dims[l]).
struct MlpModel {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t num_classes() const { return layer_dims.back(); }
  std::size_t parameter_count() const;

  // Glorot-uniform weights, zero biases, drawn from rng.
  static MlpModel init(const std::vector<std::size_t>& dims, Rng& rng);

  // Throws ConfigError if shapes are inconsistent or parameters non-finite.
  void validate() const;
};

// Per-parameter gradients, shapes mirroring the model, plus the loss value
// they were taken at.
struct GradientSet {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  double loss = 0.0;

  static GradientSet zeros_like(const MlpModel& model);
};

// Row-wise stable softmax of affine/ReLU stack output. Rows of the result sum
// to 1 within 1e-9.
Matrix forward(const MlpModel& model, const Matrix& inputs);

// Gradient of mean cross-entropy over all rows of one view. Used by the
// plain supervised baseline and as a component oracle.
GradientSet ce_backward(const MlpModel& model, const Matrix& inputs,
                        const std::vector<int>& labels);

// Combined objective for one mini-batch with a fixed selection mask:
//   L = (1 - alpha) * [CE_w(selected) + CE_s(selected)] + alpha * symKL(p_s, p_w)
// CE terms are means over selected rows (0 when nothing is selected); the
// consistency term is a mean over all rows and is differentiated through both
// views. `selected` has one flag per batch row.
double combined_loss(const MlpModel& model, const Matrix& weak,
                     const Matrix& strong, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& selected, double alpha);

// Analytic gradient of combined_loss with respect to every weight and bias.
GradientSet backward(const MlpModel& model, const Matrix& weak,
                     const Matrix& strong, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& selected, double alpha);

}  // namespace dnfer
