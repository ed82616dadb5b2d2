#pragma once

#include <vector>

#include "dnfer/matrix.hpp"

namespace dnfer {

struct CrossEntropyResult {
  double mean_loss = 0.0;
  std::vector<double> per_sample;
};

// per_sample[i] = -ln(probs[i, labels[i]]), probability floored at 1e-12
// before the log. Throws InputError on out-of-range labels.
CrossEntropyResult cross_entropy(const Matrix& posteriors,
                                 const std::vector<int>& labels);

// Mean over rows of D_KL(p_i||q_i) + D_KL(q_i||p_i), both log arguments
// floored at 1e-12. Symmetric in its arguments and non-negative.
double symmetric_kl(const Matrix& p, const Matrix& q);

}  // namespace dnfer
