#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dnfer/error.hpp"
#include "dnfer/losses.hpp"
#include "test_util.hpp"

using namespace dnfer;
using testutil::matrix_from;

TEST_CASE("cross_entropy hand values") {
  SUBCASE("near-perfect prediction costs nearly nothing") {
    const Matrix probs = matrix_from({{1.0 - 2e-12, 2e-12}});
    const CrossEntropyResult r = cross_entropy(probs, {0});
    CHECK(r.per_sample[0] < 1e-9);
  }
  SUBCASE("p_y = 0.5 costs ln 2") {
    const Matrix probs = matrix_from({{0.5, 0.5}});
    const CrossEntropyResult r = cross_entropy(probs, {0});
    CHECK(r.per_sample[0] == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  }
  SUBCASE("mean of ln2 and ln4 is 1.5 ln2") {
    const Matrix probs = matrix_from({{0.5, 0.5}, {0.25, 0.75}});
    const CrossEntropyResult r = cross_entropy(probs, {0, 0});
    CHECK(r.mean_loss == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("probability floor keeps the loss finite") {
    const Matrix probs = matrix_from({{0.0, 1.0}});
    const CrossEntropyResult r = cross_entropy(probs, {0});
    CHECK(std::isfinite(r.per_sample[0]));
    CHECK(r.per_sample[0] == doctest::Approx(-std::log(1e-12)));
  }
  SUBCASE("label out of range") {
    const Matrix probs = matrix_from({{0.5, 0.5}});
    CHECK_THROWS_AS(cross_entropy(probs, {2}), InputError);
    CHECK_THROWS_AS(cross_entropy(probs, {-1}), InputError);
  }
  SUBCASE("length mismatch") {
    const Matrix probs = matrix_from({{0.5, 0.5}});
    CHECK_THROWS_AS(cross_entropy(probs, {0, 1}), InputError);
  }
}

TEST_CASE("cross_entropy matches the brute-force reference on random batches") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t batch = 1 + rng.below(24);
    const int classes = 2 + static_cast<int>(rng.below(6));
    const Matrix probs = testutil::random_posteriors(rng, batch, classes);
    const std::vector<int> labels = testutil::random_labels(rng, batch, classes);
    const CrossEntropyResult r = cross_entropy(probs, labels);
    CHECK(std::abs(r.mean_loss - testutil::brute_ce_mean(probs, labels)) < 1e-12);
    for (std::size_t i = 0; i < batch; ++i)
      CHECK(std::abs(r.per_sample[i] - testutil::brute_ce_sample(probs, i, labels[i])) < 1e-12);
  }
}

TEST_CASE("cross_entropy is permutation-equivariant") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t batch = 2 + rng.below(20);
    const int classes = 2 + static_cast<int>(rng.below(5));
    const Matrix probs = testutil::random_posteriors(rng, batch, classes);
    const std::vector<int> labels = testutil::random_labels(rng, batch, classes);

    std::vector<std::size_t> perm(batch);
    for (std::size_t i = 0; i < batch; ++i) perm[i] = i;
    rng.shuffle(perm);
    Matrix probs_p(batch, static_cast<std::size_t>(classes));
    std::vector<int> labels_p(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      labels_p[i] = labels[perm[i]];
      for (std::size_t c = 0; c < probs.cols(); ++c) probs_p(i, c) = probs(perm[i], c);
    }
    CHECK(cross_entropy(probs, labels).mean_loss ==
          doctest::Approx(cross_entropy(probs_p, labels_p).mean_loss).epsilon(1e-12));
  }
}

TEST_CASE("symmetric_kl hand values") {
  SUBCASE("identical distributions have zero divergence") {
    const Matrix p = matrix_from({{0.2, 0.3, 0.5}});
    CHECK(symmetric_kl(p, p) == 0.0);
  }
  SUBCASE("(.75,.25) vs (.25,.75) is ln 3") {
    const Matrix p = matrix_from({{0.75, 0.25}});
    const Matrix q = matrix_from({{0.25, 0.75}});
    CHECK(symmetric_kl(p, q) == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  }
  SUBCASE("(.9,.1) vs (.1,.9) matches the independent summation") {
    const Matrix p = matrix_from({{0.9, 0.1}});
    const Matrix q = matrix_from({{0.1, 0.9}});
    // frozen from the brute-force oracle: 1.6 * ln 9
    CHECK(symmetric_kl(p, q) == doctest::Approx(3.5155593237379514).epsilon(1e-9));
    CHECK(symmetric_kl(p, q) == doctest::Approx(testutil::brute_sym_kl(p, q)).epsilon(1e-12));
  }
  SUBCASE("shape mismatch") {
    const Matrix p = matrix_from({{0.5, 0.5}});
    const Matrix q = matrix_from({{0.2, 0.3, 0.5}});
    CHECK_THROWS_AS(symmetric_kl(p, q), InputError);
  }
}

TEST_CASE("symmetric_kl properties on random batches") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t batch = 1 + rng.below(16);
    const int classes = 2 + static_cast<int>(rng.below(6));
    const Matrix p = testutil::random_posteriors(rng, batch, classes);
    const Matrix q = testutil::random_posteriors(rng, batch, classes);
    const double v = symmetric_kl(p, q);
    CHECK(v >= 0.0);
    CHECK(v == symmetric_kl(q, p));  // bitwise commutative
    CHECK(std::abs(v - testutil::brute_sym_kl(p, q)) < 1e-12);
  }
}
