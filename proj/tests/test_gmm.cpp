// Copyright 2026 The otfusion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "otfusion/errors.hpp"
#include "otfusion/gmm.hpp"
#include "support.hpp"

using namespace otfusion;

namespace {

GmmParams random_params(std::mt19937_64& rng, std::size_t k, std::size_t d) {
  std::uniform_real_distribution<double> u(0.3, 1.5);
  GmmParams p;
  p.means = testing::random_matrix(rng, k, d, -2.0, 2.0);
  for (std::size_t j = 0; j < d; ++j) p.shared_var.push_back(u(rng));
  double total = 0;
  for (std::size_t c = 0; c < k; ++c) {
    p.weights.push_back(u(rng));
    total += p.weights.back();
  }
  for (double& w : p.weights) w /= total;
  return p;
}

// sum_ik Q_ik log N(x_i; mu_k, diag(var)), evaluated directly.
double expected_complete_ll(const FeatureMatrix& x, const ProbMatrix& q,
                            const Matrix& means, const std::vector<double>& var) {
  double s = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < means.rows(); ++k) {
      double ll = 0;
      for (std::size_t d = 0; d < x.cols(); ++d) {
        const double diff = x(i, d) - means(k, d);
        ll += -0.5 * std::log(2 * std::numbers::pi * var[d]) - diff * diff / (2 * var[d]);
      }
      s += q(i, k) * ll;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("e_step: single component gives exact ones") {
  std::mt19937_64 rng(21);
  const FeatureMatrix x(testing::random_matrix(rng, 7, 3));
  const ProbMatrix p = e_step(x, random_params(rng, 1, 3));
  for (std::size_t i = 0; i < 7; ++i) CHECK(p(i, 0) == 1.0);
}

TEST_CASE("e_step: equidistant point splits evenly") {
  GmmParams p;
  p.means = Matrix::from_rows({{-1, 0}, {1, 0}});
  p.shared_var = {0.7, 0.7};
  p.weights = {0.5, 0.5};
  const ProbMatrix post = e_step(FeatureMatrix(Matrix::from_rows({{0, 3}})), p);
  CHECK(post(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(post(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("e_step: matches scalar-loop density oracle") {
  std::mt19937_64 rng(22);
  const FeatureMatrix x(testing::random_matrix(rng, 10, 4, -2.0, 2.0));
  const GmmParams params = random_params(rng, 3, 4);
  const ProbMatrix p = e_step(x, params);
  const auto ref = oracle::posteriors(testing::to_grid(x.matrix()),
                                      testing::to_grid(params.means),
                                      params.shared_var, params.weights);
  CHECK(testing::max_abs_diff(p.matrix(), ref) < 1e-10);
  for (double s : p.matrix().row_sums()) CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("e_step: invariant to rescaling the weights") {
  std::mt19937_64 rng(23);
  const FeatureMatrix x(testing::random_matrix(rng, 12, 3, -2.0, 2.0));
  const GmmParams params = random_params(rng, 4, 3);
  GmmParams scaled = params;
  for (double& w : scaled.weights) w *= 37.5;
  CHECK(testing::max_abs_diff(e_step(x, params).matrix(), e_step(x, scaled).matrix()) < 1e-15);
}

TEST_CASE("e_step: translation equivariant") {
  std::mt19937_64 rng(24);
  Matrix xm = testing::random_matrix(rng, 15, 3, -2.0, 2.0);
  const GmmParams params = random_params(rng, 3, 3);
  const std::vector<double> shift{3.0, -1.5, 0.25};
  Matrix shifted = xm;
  GmmParams moved = params;
  for (std::size_t i = 0; i < shifted.rows(); ++i)
    for (std::size_t d = 0; d < 3; ++d) shifted(i, d) += shift[d];
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t d = 0; d < 3; ++d) moved.means(k, d) += shift[d];
  CHECK(testing::max_abs_diff(e_step(FeatureMatrix(xm), params).matrix(),
                              e_step(FeatureMatrix(shifted), moved).matrix()) < 1e-12);
}

TEST_CASE("e_step: shape and numeric errors") {
  std::mt19937_64 rng(25);
  const FeatureMatrix x(testing::random_matrix(rng, 4, 3));
  CHECK_THROWS_AS(e_step(x, random_params(rng, 2, 2)), ShapeError);
  GmmParams bad = random_params(rng, 2, 3);
  bad.shared_var[1] = 0.0;
  CHECK_THROWS_AS(e_step(x, bad), InvalidInputError);
  GmmParams tiny = random_params(rng, 2, 3);
  tiny.shared_var = {1e-320, 1e-320, 1e-320};
  CHECK_THROWS_AS(e_step(FeatureMatrix(Matrix::from_rows({{1e6, 1e6, 1e6}})), tiny),
                  NumericError);
}

TEST_CASE("m_step_from_q: one-hot Q recovers cluster means exactly") {
  const FeatureMatrix x(Matrix::from_rows({{0, 0}, {2, 1}, {10, 10}, {11, 13}, {12, 7}}));
  const ProbMatrix q = ProbMatrix::validate(Matrix::from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}, {0, 1}}));
  const GmmParams p = m_step_from_q(x, q, uniform_params(x, 2));
  CHECK(p.means(0, 0) == (0.0 + 2.0) / 2);
  CHECK(p.means(0, 1) == (0.0 + 1.0) / 2);
  CHECK(p.means(1, 0) == (10.0 + 11.0 + 12.0) / 3);
  CHECK(p.means(1, 1) == (10.0 + 13.0 + 7.0) / 3);
  CHECK(p.weights == std::vector<double>{0.5, 0.5});
}

TEST_CASE("m_step_from_q: uniform Q collapses to the global mean") {
  std::mt19937_64 rng(26);
  const FeatureMatrix x(testing::random_matrix(rng, 9, 3, -1.0, 4.0));
  const ProbMatrix q = ProbMatrix::validate(Matrix(9, 3, 1.0 / 3), 1e-12);
  const GmmParams p = m_step_from_q(x, q, uniform_params(x, 3));
  const GmmParams global = uniform_params(x, 1);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t d = 0; d < 3; ++d) CHECK(std::abs(p.means(k, d) - global.means(0, d)) < 1e-12);
}

TEST_CASE("m_step_from_q: matches weighted-mean/variance oracle") {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureMatrix x(testing::random_matrix(rng, 8, 2, -3.0, 3.0));
    const ProbMatrix q = ProbMatrix::validate(testing::random_stochastic(rng, 8, 3), 1e-12);
    const GmmParams p = m_step_from_q(x, q, uniform_params(x, 3));
    const auto ref = oracle::weighted_fit(testing::to_grid(x.matrix()), testing::to_grid(q.matrix()));
    CHECK(testing::max_abs_diff(p.means, ref.means) < 1e-12);
    for (std::size_t d = 0; d < 2; ++d) CHECK(std::abs(p.shared_var[d] - ref.var[d]) < 1e-12);
  }
}

TEST_CASE("m_step_from_q: means maximize the Q-weighted log-likelihood") {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureMatrix x(testing::random_matrix(rng, 12, 3, -2.0, 2.0));
    const ProbMatrix q = ProbMatrix::validate(testing::random_stochastic(rng, 12, 3), 1e-12);
    const GmmParams p = m_step_from_q(x, q, uniform_params(x, 3));
    const double best = expected_complete_ll(x, q, p.means, p.shared_var);
    const double delta = 1e-3 * 4.0;  // feature range is 4
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t d = 0; d < 3; ++d) {
        for (double sign : {-1.0, 1.0}) {
          Matrix moved = p.means;
          moved(k, d) += sign * delta;
          CHECK(expected_complete_ll(x, q, moved, p.shared_var) <= best);
        }
      }
    }
  }
}

TEST_CASE("m_step_from_q: empty component keeps its previous mean") {
  const FeatureMatrix x(Matrix::from_rows({{0, 0}, {1, 1}, {2, 0}}));
  const ProbMatrix q = ProbMatrix::validate(Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {1, 0, 0}}));
  GmmParams prev = uniform_params(x, 3);
  prev.means(2, 0) = 42.0;
  prev.means(2, 1) = -7.0;
  GmmDiagnostics diag;
  const GmmParams p = m_step_from_q(x, q, prev, PiMode::kUniform, &diag);
  CHECK(p.means(2, 0) == 42.0);
  CHECK(p.means(2, 1) == -7.0);
  REQUIRE(diag.messages.size() == 1);
  CHECK(diag.messages[0].find("component 2") != std::string::npos);
  for (double v : p.shared_var) CHECK(std::isfinite(v));
  // Variance only sums over the live components: cluster 0 has points
  // (0,0),(2,0) around (1,0); cluster 1 is a single point.
  CHECK(std::abs(p.shared_var[0] - 2.0 / 3) < 1e-15);
}

TEST_CASE("m_step_from_q: variance floor on duplicated features") {
  const FeatureMatrix x(Matrix::from_rows({{1, 5}, {1, 5}, {3, 5}, {3, 5}}));
  const ProbMatrix q = ProbMatrix::validate(Matrix::from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}}));
  const GmmParams p = m_step_from_q(x, q, uniform_params(x, 2));
  const double floor = variance_floor(x);
  CHECK(floor == doctest::Approx(1e-6 * 0.5));  // mean of per-dim variances {1, 0}
  CHECK(p.shared_var[0] == floor);
  CHECK(p.shared_var[1] == floor);
  CHECK_NOTHROW(e_step(x, p));
}

TEST_CASE("m_step_from_q: estimated mixture weights") {
  std::mt19937_64 rng(29);
  const FeatureMatrix x(testing::random_matrix(rng, 10, 2));
  const ProbMatrix q = ProbMatrix::validate(testing::random_stochastic(rng, 10, 3), 1e-12);
  const GmmParams p = m_step_from_q(x, q, uniform_params(x, 3), PiMode::kEstimate);
  const auto mass = q.matrix().col_sums();
  double total = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(p.weights[k] - mass[k] / 10.0) < 1e-12);
    total += p.weights[k];
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("m_step_from_q: shape errors") {
  std::mt19937_64 rng(30);
  const FeatureMatrix x(testing::random_matrix(rng, 5, 2));
  const ProbMatrix q = ProbMatrix::validate(testing::random_stochastic(rng, 4, 2), 1e-12);
  CHECK_THROWS_AS(m_step_from_q(x, q, uniform_params(x, 2)), ShapeError);
  const ProbMatrix q5 = ProbMatrix::validate(testing::random_stochastic(rng, 5, 2), 1e-12);
  CHECK_THROWS_AS(m_step_from_q(x, q5, uniform_params(x, 3)), ShapeError);
}

TEST_CASE("init_from_semantic: correct one-hot Y gives true cluster means") {
  const FeatureMatrix x(Matrix::from_rows({{0, 0}, {0, 2}, {9, 9}, {11, 9}}));
  const ProbMatrix y = ProbMatrix::validate(Matrix::from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}}));
  const GmmParams p = init_from_semantic(x, y);
  CHECK(p.means == Matrix::from_rows({{0, 1}, {10, 9}}));
}

TEST_CASE("init_from_semantic: uniform Y starts every mean at the global mean") {
  std::mt19937_64 rng(31);
  const FeatureMatrix x(testing::random_matrix(rng, 6, 2));
  const GmmParams p = init_from_semantic(x, ProbMatrix::validate(Matrix(6, 2, 0.5)));
  const GmmParams g = uniform_params(x, 2);
  CHECK(testing::max_abs_diff(p.means, g.means) < 1e-12);
}

TEST_CASE("init_from_semantic: same as m_step_from_q from uniform parameters") {
  std::mt19937_64 rng(32);
  const FeatureMatrix x(testing::random_matrix(rng, 50, 4, -1.0, 1.0));
  const ProbMatrix y = ProbMatrix::validate(testing::random_stochastic(rng, 50, 3), 1e-12);
  CHECK(init_from_semantic(x, y) == m_step_from_q(x, y, uniform_params(x, 3)));
}

TEST_CASE("init_from_semantic: fewer samples than classes is a diagnostic") {
  std::mt19937_64 rng(33);
  const FeatureMatrix x(testing::random_matrix(rng, 2, 2));
  GmmDiagnostics diag;
  init_from_semantic(x, ProbMatrix::validate(Matrix(2, 3, 1.0 / 3), 1e-12), PiMode::kUniform, &diag);
  CHECK_FALSE(diag.messages.empty());
}

TEST_CASE("fit_em: log-likelihood never decreases") {
  std::mt19937_64 rng(34);
  const FeatureMatrix x(testing::random_matrix(rng, 40, 2, -3.0, 3.0));
  GmmParams params = init_from_semantic(x, ProbMatrix::validate(testing::random_stochastic(rng, 40, 3), 1e-12));
  double prev = log_likelihood(x, params);
  for (int it = 0; it < 20; ++it) {
    params = m_step_from_q(x, e_step(x, params), params);
    const double ll = log_likelihood(x, params);
    CHECK(ll >= prev - 1e-9);
    prev = ll;
  }
  const EmFit fit = fit_em(x, init_from_semantic(x, e_step(x, params)), 50, 1e-8);
  CHECK(fit.iterations >= 1);
  CHECK(fit.iterations <= 50);
}

TEST_CASE("concat_features") {
  const FeatureMatrix a(Matrix::from_rows({{3, 4}, {0, 2}}));
  const FeatureMatrix b(Matrix::from_rows({{1, 0}, {1, 1}}));
  const std::vector<FeatureMatrix> one{a};
  CHECK(concat_features(one) == l2_normalize_rows(a));

  const std::vector<FeatureMatrix> two{a, b};
  const FeatureMatrix c = concat_features(two);
  REQUIRE(c.rows() == 2);
  REQUIRE(c.cols() == 4);
  CHECK(c(0, 0) == doctest::Approx(0.6));
  CHECK(c(0, 1) == doctest::Approx(0.8));
  CHECK(c(0, 2) == 1.0);
  CHECK(c(1, 3) == doctest::Approx(std::sqrt(0.5)));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t block = 0; block < 2; ++block) {
      double ss = 0;
      for (std::size_t d = 0; d < 2; ++d) ss += c(i, 2 * block + d) * c(i, 2 * block + d);
      CHECK(std::abs(ss - 1.0) < 1e-15);
    }
  }

  const std::vector<FeatureMatrix> bad{a, FeatureMatrix(Matrix(3, 2, 1.0))};
  CHECK_THROWS_AS(concat_features(bad), ShapeError);
}
