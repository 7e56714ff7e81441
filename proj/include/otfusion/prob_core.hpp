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

#ifndef OTFUSION_PROB_CORE_HPP_
#define OTFUSION_PROB_CORE_HPP_

#include <cstddef>
#include <span>

#include "otfusion/matrix.hpp"

namespace otfusion {

// Row-sum tolerance for matrices read from files (possibly 32-bit sources).
inline constexpr double kIngestRowSumTol = 1e-6;
// Row-sum tolerance for matrices the engine produces itself.
inline constexpr double kInternalRowSumTol = 1e-12;

// N x K row-stochastic matrix: entries finite and >= 0, rows sum to one.
// Immutable once constructed.
class ProbMatrix {
 public:
  // Throws InvalidInputError if any entry is negative or non-finite, or if a
  // row sum differs from one by more than `tol`.
  static ProbMatrix validate(Matrix m, double tol = kInternalRowSumTol);

  // Validates at `tol`, then rescales each row to sum to one in 64-bit.
  static ProbMatrix ingest(Matrix m, double tol = kIngestRowSumTol);

  const Matrix& matrix() const { return m_; }
  std::size_t rows() const { return m_.rows(); }
  std::size_t cols() const { return m_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  std::span<const double> row(std::size_t i) const { return m_.row(i); }

  friend bool operator==(const ProbMatrix&, const ProbMatrix&) = default;

 private:
  explicit ProbMatrix(Matrix m) : m_(std::move(m)) {}
  friend ProbMatrix row_normalize(const Matrix& m);
  friend ProbMatrix row_softmax(const Matrix& logits, double temperature);

  Matrix m_;
};

// N x D matrix of visual embeddings; all entries finite, N >= 1, D >= 1.
class FeatureMatrix {
 public:
  // Throws InvalidInputError on empty shape or non-finite entries.
  explicit FeatureMatrix(Matrix m);

  const Matrix& matrix() const { return m_; }
  std::size_t rows() const { return m_.rows(); }
  std::size_t cols() const { return m_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  std::span<const double> row(std::size_t i) const { return m_.row(i); }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  Matrix m_;
};

// max(v) + log(sum(exp(v - max(v)))). Throws InvalidInputError when v is
// empty or contains non-finite values.
double log_sum_exp(std::span<const double> v);

// Per-row softmax of temperature * logits with max subtraction.
ProbMatrix row_softmax(const Matrix& logits, double temperature);

// H(Q) = -sum Q_ij log Q_ij with 0 log 0 = 0. Throws on negative entries.
double entropy(const Matrix& q);

// Divides every row by its sum. Throws DegenerateRowError on a row whose
// sum is not strictly positive, InvalidInputError on negative entries.
ProbMatrix row_normalize(const Matrix& m);

}  // namespace otfusion

#endif  // OTFUSION_PROB_CORE_HPP_
