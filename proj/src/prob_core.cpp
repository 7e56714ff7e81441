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

#include "otfusion/prob_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "otfusion/errors.hpp"

namespace otfusion {

namespace {

void require_nonneg_finite(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double x = m(i, j);
      if (!std::isfinite(x) || x < 0.0) {
        throw InvalidInputError(std::string(what) + ": entry (" +
                                std::to_string(i) + "," + std::to_string(j) +
                                ") is negative or non-finite");
      }
    }
  }
}

}  // namespace

ProbMatrix ProbMatrix::validate(Matrix m, double tol) {
  require_nonneg_finite(m, "probability matrix");
  const auto sums = m.row_sums();
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (std::abs(sums[i] - 1.0) > tol) {
      throw InvalidInputError("probability matrix: row " + std::to_string(i) +
                              " sums to " + std::to_string(sums[i]));
    }
  }
  return ProbMatrix(std::move(m));
}

ProbMatrix ProbMatrix::ingest(Matrix m, double tol) {
  validate(m, tol);
  return row_normalize(m);
}

FeatureMatrix::FeatureMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() == 0 || m_.cols() == 0) {
    throw InvalidInputError("feature matrix must have at least one row and column");
  }
  if (!m_.all_finite()) {
    throw InvalidInputError("feature matrix contains non-finite values");
  }
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw InvalidInputError("log_sum_exp of empty vector");
  double hi = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw InvalidInputError("log_sum_exp of non-finite value");
    }
    hi = std::max(hi, x);
  }
  if (v.size() == 1) return v[0];
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

ProbMatrix row_softmax(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidInputError("softmax temperature must be positive and finite");
  }
  if (!logits.all_finite()) {
    throw InvalidInputError("softmax logits contain non-finite values");
  }
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto in = logits.row(i);
    auto o = out.row(i);
    const double hi = *std::max_element(in.begin(), in.end());
    double denom = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(temperature * (in[j] - hi));
      denom += o[j];
    }
    for (double& x : o) x /= denom;
  }
  return ProbMatrix(std::move(out));
}

double entropy(const Matrix& q) {
  double h = 0.0;
  for (double x : q.values()) {
    if (x < 0.0 || std::isnan(x)) {
      throw InvalidInputError("entropy: negative or NaN entry");
    }
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

ProbMatrix row_normalize(const Matrix& m) {
  require_nonneg_finite(m, "row_normalize");
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double s = 0.0;
    for (double x : r) s += x;
    if (!(s > 0.0)) throw DegenerateRowError(i);
    for (double& x : r) x /= s;
  }
  return ProbMatrix(std::move(out));
}

}  // namespace otfusion
