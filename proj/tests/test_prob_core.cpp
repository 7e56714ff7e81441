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
#include <limits>
#include <numbers>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "otfusion/errors.hpp"
#include "otfusion/prob_core.hpp"
#include "support.hpp"

using namespace otfusion;

TEST_CASE("row_softmax: equal logits give a uniform row") {
  const ProbMatrix p = row_softmax(Matrix::from_rows({{1, 1, 1}}), 5.0);
  for (std::size_t j = 0; j < 3; ++j) CHECK(p(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("row_softmax: analytic two-class case") {
  const ProbMatrix p = row_softmax(Matrix::from_rows({{0.0, std::log(2.0)}}), 1.0);
  CHECK(std::abs(p(0, 0) - 1.0 / 3) < 1e-15);
  CHECK(std::abs(p(0, 1) - 2.0 / 3) < 1e-15);
}

TEST_CASE("row_softmax: matches scalar-loop reference at tau = 100") {
  std::mt19937_64 rng(11);
  const Matrix logits = testing::random_matrix(rng, 3, 4);
  const ProbMatrix p = row_softmax(logits, 100.0);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto ref = oracle::softmax_row({logits.row(i).begin(), logits.row(i).end()}, 100.0);
    double sum = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(p(i, j) - ref[j]) < 1e-12);
      sum += p(i, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("row_softmax: rejects bad input") {
  CHECK_THROWS_AS(row_softmax(Matrix::from_rows({{1.0, NAN}}), 1.0), InvalidInputError);
  CHECK_THROWS_AS(row_softmax(Matrix::from_rows({{1.0, INFINITY}}), 1.0), InvalidInputError);
  CHECK_THROWS_AS(row_softmax(Matrix::from_rows({{1.0, 2.0}}), 0.0), InvalidInputError);
  CHECK_THROWS_AS(row_softmax(Matrix::from_rows({{1.0, 2.0}}), -1.0), InvalidInputError);
}

TEST_CASE("row_softmax: invariant to per-row shifts") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix logits = testing::random_matrix(rng, 4, 6, -1.0, 1.0);
    Matrix shifted = logits;
    for (std::size_t i = 0; i < shifted.rows(); ++i) {
      const double c = shift(rng);
      for (double& x : shifted.row(i)) x += c;
    }
    const double tau = 0.5 + trial;
    CHECK(testing::max_abs_diff(row_softmax(logits, tau).matrix(),
                                row_softmax(shifted, tau).matrix()) < 1e-12);
  }
}

TEST_CASE("entropy: closed forms") {
  CHECK(std::abs(entropy(Matrix(2, 2, 0.25)) - std::log(4.0)) < 1e-15);
  CHECK(entropy(Matrix::from_rows({{1, 0, 0}, {0, 0, 1}})) == 0.0);
  CHECK(entropy(Matrix(3, 3, 0.0)) == 0.0);
}

TEST_CASE("entropy: matches scalar-loop reference") {
  std::mt19937_64 rng(13);
  const Matrix q = testing::random_matrix(rng, 5, 3);
  CHECK(std::abs(entropy(q) - oracle::entropy(testing::to_grid(q))) < 1e-12);
}

TEST_CASE("entropy: negative entry is rejected") {
  CHECK_THROWS_AS(entropy(Matrix::from_rows({{0.5, -0.1}})), InvalidInputError);
}

TEST_CASE("entropy: bounded by log(NK) at unit mass") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 7, k = 1 + trial % 5;
    Matrix q = testing::random_matrix(rng, n, k);
    q *= 1.0 / q.sum();
    CHECK(entropy(q) <= std::log(static_cast<double>(n * k)) + 1e-12);
    CHECK(entropy(q) >= 0.0);
  }
}

TEST_CASE("row_normalize: examples") {
  CHECK(row_normalize(Matrix::from_rows({{2, 2}, {1, 3}})).matrix() ==
        Matrix::from_rows({{0.5, 0.5}, {0.25, 0.75}}));
  const Matrix eye = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CHECK(row_normalize(eye).matrix() == eye);
}

TEST_CASE("row_normalize: zero-sum row names its index") {
  CHECK_THROWS_AS(row_normalize(Matrix::from_rows({{0, 0}})), DegenerateRowError);
  try {
    row_normalize(Matrix::from_rows({{1, 2}, {0, 0}, {3, 4}}));
    FAIL("expected DegenerateRowError");
  } catch (const DegenerateRowError& e) {
    CHECK(e.row() == 1);
  }
}

TEST_CASE("row_normalize: idempotent") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const ProbMatrix once = row_normalize(testing::random_matrix(rng, 6, 4, 0.0, 10.0));
    const ProbMatrix twice = row_normalize(once.matrix());
    CHECK(testing::max_abs_diff(once.matrix(), twice.matrix()) < 1e-15);
  }
}

TEST_CASE("log_sum_exp") {
  const std::vector<double> zero{0.0};
  CHECK(log_sum_exp(zero) == 0.0);
  const std::vector<double> single{-3.25};
  CHECK(log_sum_exp(single) == -3.25);
  const std::vector<double> pair{0.7, 0.7};
  CHECK(std::abs(log_sum_exp(pair) - (0.7 + std::numbers::ln2)) < 1e-15);
  const std::vector<double> big{1000.0, 1000.0};
  const double v = log_sum_exp(big);
  CHECK(std::isfinite(v));
  CHECK(std::abs(v - (1000.0 + std::numbers::ln2)) < 1e-12);
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), InvalidInputError);
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{1.0, NAN}), InvalidInputError);
}

TEST_CASE("ProbMatrix: ingest tolerance and renormalization") {
  const ProbMatrix p = ProbMatrix::ingest(Matrix::from_rows({{0.5, 0.5000005}}));
  CHECK(std::abs(p(0, 0) + p(0, 1) - 1.0) < 1e-15);
  CHECK_THROWS_AS(ProbMatrix::ingest(Matrix::from_rows({{0.5, 0.50001}})), InvalidInputError);
  CHECK_THROWS_AS(ProbMatrix::validate(Matrix::from_rows({{0.5, 0.5000005}})), InvalidInputError);
  CHECK_THROWS_AS(ProbMatrix::validate(Matrix::from_rows({{1.5, -0.5}})), InvalidInputError);
}

TEST_CASE("FeatureMatrix: invariants") {
  CHECK_THROWS_AS(FeatureMatrix(Matrix(0, 3)), InvalidInputError);
  CHECK_THROWS_AS(FeatureMatrix(Matrix(2, 0)), InvalidInputError);
  CHECK_THROWS_AS(FeatureMatrix(Matrix::from_rows({{1.0, NAN}})), InvalidInputError);
  CHECK_NOTHROW(FeatureMatrix(Matrix::from_rows({{1.0, -2.0}})));
}

TEST_CASE("Matrix: shape checks") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  Matrix a(2, 2, 1.0);
  CHECK_THROWS_AS(a.add_scaled(Matrix(2, 3), 1.0), ShapeError);
}
