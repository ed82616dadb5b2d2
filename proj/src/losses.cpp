#include "dnfer/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dnfer/error.hpp"

namespace dnfer {

namespace {
constexpr double kProbFloor = 1e-12;
}

CrossEntropyResult cross_entropy(const Matrix& posteriors,
                                 const std::vector<int>& labels) {
  if (labels.size() != posteriors.rows())
    throw InputError("cross_entropy: labels length != batch size");
  if (labels.empty()) throw InputError("cross_entropy: empty batch");
  CrossEntropyResult result;
  result.per_sample.reserve(labels.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < posteriors.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= posteriors.cols())
      throw InputError("cross_entropy: label " + std::to_string(y) +
                       " out of range at row " + std::to_string(i));
    const double loss = -std::log(std::max(posteriors(i, static_cast<std::size_t>(y)), kProbFloor));
    result.per_sample.push_back(loss);
    sum += loss;
  }
  result.mean_loss = sum / static_cast<double>(labels.size());
  return result;
}

double symmetric_kl(const Matrix& p, const Matrix& q) {
  if (!p.same_shape(q)) throw InputError("symmetric_kl: shape mismatch");
  if (p.rows() == 0) throw InputError("symmetric_kl: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double row = 0.0;
    for (std::size_t c = 0; c < p.cols(); ++c) {
      // (p-q)(ln p - ln q) is the two KL directions folded together; each
      // term is >= 0 and the sum is bitwise symmetric in (p, q).
      const double lr = std::log(std::max(p(i, c), kProbFloor)) -
                        std::log(std::max(q(i, c), kProbFloor));
      row += (p(i, c) - q(i, c)) * lr;
    }
    total += row;
  }
  return total / static_cast<double>(p.rows());
}

}  // namespace dnfer
