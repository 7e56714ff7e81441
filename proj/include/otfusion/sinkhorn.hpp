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

#ifndef OTFUSION_SINKHORN_HPP_
#define OTFUSION_SINKHORN_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "otfusion/matrix.hpp"

namespace otfusion {

// Prescribed row (per-sample) and column (per-class) mass of a transport
// plan. Entries are positive; both vectors carry the same total mass.
class Marginals {
 public:
  // Throws InvalidInputError on non-positive entries or if the totals
  // differ by more than 1e-9.
  Marginals(std::vector<double> row, std::vector<double> col);

  // r_i = 1/N, c_j = 1/K.
  static Marginals uniform(std::size_t n, std::size_t k);
  // r_i = 1/N, c_j proportional to `col_weights` with total mass 1.
  static Marginals with_columns(std::size_t n,
                                std::span<const double> col_weights);

  const std::vector<double>& row() const { return row_; }
  const std::vector<double>& col() const { return col_; }
  double total() const;

 private:
  std::vector<double> row_;
  std::vector<double> col_;
};

enum class Acceleration {
  kNone,                    // plain alternating scaling
  kAdaptiveOverrelaxation,  // relaxed scaling once the plain rate is known
};

struct SinkhornResult {
  Matrix plan;  // N x K, non-negative
  std::size_t iterations_used = 0;
  double final_violation = 0.0;  // marginal_violation(plan, marginals)
};

// Entropic OT: maximizes Tr(Q^T S) + epsilon H(Q) over plans with the given
// marginals. The plan is Diag(u) exp(S/epsilon) Diag(v) with u over samples
// and v over classes; both scalers live in the log domain so small epsilon
// does not overflow. Stops once the marginal violation is below `tol` or
// after `max_iter` sweeps; non-convergence is reported, not thrown.
//
// With kAdaptiveOverrelaxation the first sweeps are plain; after the
// observed convergence rate settles, both scaler updates are relaxed
// (log u <- (1 - w) log u + w log(r / K v)). The fixed point is unchanged.
SinkhornResult sinkhorn_solve(const Matrix& scores, double epsilon,
                              const Marginals& marginals, std::size_t max_iter,
                              double tol, Acceleration accel = Acceleration::kNone);

// max(||Q 1 - r||_1, ||Q^T 1 - c||_1).
double marginal_violation(const Matrix& q, const Marginals& marginals);

}  // namespace otfusion

#endif  // OTFUSION_SINKHORN_HPP_
