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

#include "otfusion/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "otfusion/errors.hpp"

namespace otfusion {

namespace {

constexpr double kFeasibilityTol = 1e-9;

// lse(a + b); the max bounds every exponent.
double shifted_lse(std::span<const double> a, const std::vector<double>& b) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < a.size(); ++t) hi = std::max(hi, a[t] + b[t]);
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) s += std::exp(a[t] + b[t] - hi);
  return hi + std::log(s);
}

// Chooses the relaxation weight for the scaler updates. Plain sweeps run
// first; once the per-sweep violation ratio rho has settled, the weight is
// set to 2 / (1 + sqrt(1 - rho)). Any sustained growth of the violation
// drops back to plain sweeps for the rest of the solve.
class OverrelaxationControl {
 public:
  explicit OverrelaxationControl(Acceleration accel)
      : enabled_(accel == Acceleration::kAdaptiveOverrelaxation) {}

  double omega() const { return omega_; }

  void observe(double err) {
    if (!enabled_ || !(err > 0.0)) return;
    if (omega_ > 1.0) {
      if (err < best_) {
        best_ = err;
        stalled_ = 0;
      } else if (++stalled_ >= kMaxStalled) {
        omega_ = 1.0;
        enabled_ = false;
      }
      return;
    }
    ++plain_;
    if (prev_err_ > 0.0) {
      const double ratio = err / prev_err_;
      if (plain_ > kWarmup && ratio < 1.0 &&
          std::abs(ratio - prev_ratio_) < kRatioSettle * ratio) {
        omega_ = std::min(kMaxOmega, 2.0 / (1.0 + std::sqrt(1.0 - ratio)));
        best_ = err;
      }
      prev_ratio_ = ratio;
    }
    prev_err_ = err;
  }

 private:
  static constexpr int kWarmup = 10;
  static constexpr int kMaxStalled = 20;
  static constexpr double kRatioSettle = 1e-3;
  static constexpr double kMaxOmega = 1.9;

  bool enabled_;
  double omega_ = 1.0;
  double prev_err_ = 0.0;
  double prev_ratio_ = 0.0;
  double best_ = 0.0;
  int plain_ = 0;
  int stalled_ = 0;
};

}  // namespace

Marginals::Marginals(std::vector<double> row, std::vector<double> col)
    : row_(std::move(row)), col_(std::move(col)) {
  if (row_.empty() || col_.empty()) {
    throw InvalidInputError("marginals must be non-empty");
  }
  double rs = 0.0, cs = 0.0;
  for (double v : row_) {
    if (!std::isfinite(v) || !(v > 0.0)) {
      throw InvalidInputError("row marginal entries must be positive");
    }
    rs += v;
  }
  for (double v : col_) {
    if (!std::isfinite(v) || !(v > 0.0)) {
      throw InvalidInputError("column marginal entries must be positive");
    }
    cs += v;
  }
  if (std::abs(rs - cs) > kFeasibilityTol) {
    throw InvalidInputError("infeasible marginals: row mass " +
                            std::to_string(rs) + " != column mass " +
                            std::to_string(cs));
  }
}

Marginals Marginals::uniform(std::size_t n, std::size_t k) {
  if (n == 0 || k == 0) throw InvalidInputError("marginals must be non-empty");
  return Marginals(std::vector<double>(n, 1.0 / static_cast<double>(n)),
                   std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

Marginals Marginals::with_columns(std::size_t n,
                                  std::span<const double> col_weights) {
  if (n == 0) throw InvalidInputError("marginals must be non-empty");
  double total = 0.0;
  for (double w : col_weights) total += w;
  if (!(total > 0.0)) throw InvalidInputError("column weights sum to zero");
  std::vector<double> col(col_weights.begin(), col_weights.end());
  for (double& c : col) c /= total;
  return Marginals(std::vector<double>(n, 1.0 / static_cast<double>(n)),
                   std::move(col));
}

double Marginals::total() const {
  double s = 0.0;
  for (double v : row_) s += v;
  return s;
}

double marginal_violation(const Matrix& q, const Marginals& marginals) {
  if (q.rows() != marginals.row().size() ||
      q.cols() != marginals.col().size()) {
    throw ShapeError("plan is " + std::to_string(q.rows()) + "x" +
                     std::to_string(q.cols()) + " but marginals are " +
                     std::to_string(marginals.row().size()) + "x" +
                     std::to_string(marginals.col().size()));
  }
  const auto rs = q.row_sums();
  const auto cs = q.col_sums();
  double row_err = 0.0, col_err = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    row_err += std::abs(rs[i] - marginals.row()[i]);
  }
  for (std::size_t j = 0; j < cs.size(); ++j) {
    col_err += std::abs(cs[j] - marginals.col()[j]);
  }
  return std::max(row_err, col_err);
}

SinkhornResult sinkhorn_solve(const Matrix& scores, double epsilon,
                              const Marginals& marginals, std::size_t max_iter,
                              double tol, Acceleration accel) {
  const std::size_t n = scores.rows(), k = scores.cols();
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidInputError("epsilon must be positive and finite");
  }
  if (!scores.all_finite()) {
    throw InvalidInputError("score matrix contains non-finite values");
  }
  if (max_iter == 0) throw InvalidInputError("Sinkhorn needs at least one sweep");
  if (n != marginals.row().size() || k != marginals.col().size()) {
    throw ShapeError("score matrix does not match marginal lengths");
  }

  // log kernel, its transpose (for cache-friendly column reductions), and
  // the log scalers f = log u (length N), g = log v (length K).
  Matrix log_kernel = scores;
  log_kernel *= 1.0 / epsilon;
  Matrix log_kernel_t(k, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) log_kernel_t(j, i) = log_kernel(i, j);
  }
  const auto& r = marginals.row();
  const auto& c = marginals.col();
  std::vector<double> log_r(n), log_c(k);
  for (std::size_t i = 0; i < n; ++i) log_r[i] = std::log(r[i]);
  for (std::size_t j = 0; j < k; ++j) log_c[j] = std::log(c[j]);
  std::vector<double> f(n, 0.0), g(k, 0.0);

  std::vector<double> row_lse(n), col_lse(k);
  for (std::size_t i = 0; i < n; ++i) {
    row_lse[i] = shifted_lse(log_kernel.row(i), g);
  }

  OverrelaxationControl relax(accel);
  SinkhornResult result;
  auto materialize = [&]() {
    result.plan = Matrix(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        result.plan(i, j) = std::exp(log_kernel(i, j) + f[i] + g[j]);
      }
    }
    if (!result.plan.all_finite()) {
      throw NumericError("Sinkhorn produced a non-finite plan");
    }
    result.final_violation = marginal_violation(result.plan, marginals);
    return result.final_violation;
  };
  for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
    const double w = relax.omega();
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = (1.0 - w) * f[i] + w * (log_r[i] - row_lse[i]);
    }
    double col_err = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      col_lse[j] = shifted_lse(log_kernel_t.row(j), f);
      g[j] = (1.0 - w) * g[j] + w * (log_c[j] - col_lse[j]);
      col_err += std::abs(std::exp(g[j] + col_lse[j]) - c[j]);
    }
    double row_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      row_lse[i] = shifted_lse(log_kernel.row(i), g);
      row_err += std::abs(std::exp(f[i] + row_lse[i]) - r[i]);
    }
    result.iterations_used = sweep + 1;
    const double err = std::max(row_err, col_err);
    // Confirm on the materialized plan so the reported violation is the
    // one that met the tolerance.
    if (err < tol && materialize() < tol) return result;
    relax.observe(err);
  }
  materialize();
  return result;
}

}  // namespace otfusion
