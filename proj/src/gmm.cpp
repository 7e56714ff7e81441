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

#include "otfusion/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "otfusion/errors.hpp"

namespace otfusion {

namespace {

constexpr double kEmptyClusterMass = 1e-12;
constexpr double kAbsoluteVarFloor = 1e-12;

void check_params(const FeatureMatrix& x, const GmmParams& p) {
  if (p.components() == 0) throw InvalidInputError("GMM has no components");
  if (p.dim() != x.cols() || p.shared_var.size() != x.cols()) {
    throw ShapeError("GMM dimension " + std::to_string(p.dim()) +
                     " does not match feature dimension " +
                     std::to_string(x.cols()));
  }
  if (p.weights.size() != p.components()) {
    throw ShapeError("GMM weight count does not match component count");
  }
  for (double v : p.shared_var) {
    if (!std::isfinite(v) || !(v > 0.0)) {
      throw InvalidInputError("GMM shared variance must be positive and finite");
    }
  }
  double wsum = 0.0;
  for (double w : p.weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidInputError("GMM weights must be non-negative and finite");
    }
    wsum += w;
  }
  if (!(wsum > 0.0)) throw InvalidInputError("GMM weights sum to zero");
}

// Log of pi_k N(x_i; mu_k, diag(var)) for every (i, k). Zero-weight
// components get -inf.
Matrix log_joint(const FeatureMatrix& x, const GmmParams& p) {
  check_params(x, p);
  const std::size_t n = x.rows(), k = p.components(), d = x.cols();

  double wsum = 0.0;
  for (double w : p.weights) wsum += w;
  double log_norm = 0.0;
  std::vector<double> inv_var(d);
  for (std::size_t j = 0; j < d; ++j) {
    log_norm += std::log(2.0 * std::numbers::pi * p.shared_var[j]);
    inv_var[j] = 1.0 / p.shared_var[j];
  }
  log_norm *= -0.5;

  Matrix out(n, k);
  for (std::size_t c = 0; c < k; ++c) {
    const double log_pi = p.weights[c] > 0.0
                              ? std::log(p.weights[c] / wsum)
                              : -std::numeric_limits<double>::infinity();
    auto mu = p.means.row(c);
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = x.row(i);
      double maha = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = xi[j] - mu[j];
        maha += diff * diff * inv_var[j];
      }
      const double ld = log_norm - 0.5 * maha;
      if (!std::isfinite(ld)) {
        throw NumericError("non-finite log-density for sample " +
                           std::to_string(i) + ", component " +
                           std::to_string(c));
      }
      out(i, c) = log_pi + ld;
    }
  }
  return out;
}

// log-sum-exp over the finite entries of a row; -inf entries contribute 0.
double row_lse(std::span<const double> r) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : r) hi = std::max(hi, v);
  if (!std::isfinite(hi)) throw NumericError("every component has zero weight");
  double s = 0.0;
  for (double v : r) s += std::exp(v - hi);
  return hi + std::log(s);
}

std::vector<double> column_variances(const FeatureMatrix& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = r[j] - mean[j];
      var[j] += diff * diff;
    }
  }
  for (double& v : var) v /= static_cast<double>(n);
  return var;
}

}  // namespace

double variance_floor(const FeatureMatrix& x) {
  const auto var = column_variances(x);
  double mean_var = 0.0;
  for (double v : var) mean_var += v;
  mean_var /= static_cast<double>(var.size());
  return std::max(1e-6 * mean_var, kAbsoluteVarFloor);
}

GmmParams uniform_params(const FeatureMatrix& x, std::size_t k) {
  if (k == 0) throw InvalidInputError("GMM needs at least one component");
  const std::size_t n = x.rows(), d = x.cols();
  GmmParams p;
  p.means = Matrix(k, d, 0.0);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(mean.begin(), mean.end(), p.means.row(c).begin());
  }
  const double floor = variance_floor(x);
  p.shared_var = column_variances(x);
  for (double& v : p.shared_var) v = std::max(v, floor);
  p.weights.assign(k, 1.0 / static_cast<double>(k));
  return p;
}

ProbMatrix e_step(const FeatureMatrix& x, const GmmParams& params) {
  Matrix lj = log_joint(x, params);
  for (std::size_t i = 0; i < lj.rows(); ++i) {
    auto r = lj.row(i);
    const double lse = row_lse(r);
    for (double& v : r) v = std::exp(v - lse);
  }
  return ProbMatrix::validate(std::move(lj), kInternalRowSumTol);
}

double log_likelihood(const FeatureMatrix& x, const GmmParams& params) {
  const Matrix lj = log_joint(x, params);
  double ll = 0.0;
  for (std::size_t i = 0; i < lj.rows(); ++i) ll += row_lse(lj.row(i));
  return ll;
}

GmmParams m_step_from_q(const FeatureMatrix& x, const ProbMatrix& q,
                        const GmmParams& prev, PiMode pi_mode,
                        GmmDiagnostics* diag) {
  const std::size_t n = x.rows(), d = x.cols(), k = q.cols();
  if (q.rows() != n) {
    throw ShapeError("assignment has " + std::to_string(q.rows()) +
                     " rows, features have " + std::to_string(n));
  }
  if (prev.components() != k || prev.dim() != d ||
      prev.weights.size() != k || prev.shared_var.size() != d) {
    throw ShapeError("previous GMM parameters do not match assignment/features");
  }

  const std::vector<double> mass = q.matrix().col_sums();
  std::vector<bool> live(k);
  for (std::size_t c = 0; c < k; ++c) {
    live[c] = mass[c] >= kEmptyClusterMass;
    if (!live[c] && diag != nullptr) {
      diag->messages.push_back("component " + std::to_string(c) +
                               " received no mass; previous mean kept");
    }
  }

  GmmParams next;
  next.means = Matrix(k, d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x.row(i);
    auto qi = q.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (!live[c]) continue;
      auto mu = next.means.row(c);
      for (std::size_t j = 0; j < d; ++j) mu[j] += qi[c] * xi[j];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    auto mu = next.means.row(c);
    if (live[c]) {
      for (double& v : mu) v /= mass[c];
    } else {
      auto old = prev.means.row(c);
      std::copy(old.begin(), old.end(), mu.begin());
    }
  }

  next.shared_var.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x.row(i);
    auto qi = q.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (!live[c]) continue;
      auto mu = next.means.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = xi[j] - mu[j];
        next.shared_var[j] += qi[c] * diff * diff;
      }
    }
  }
  const double floor = variance_floor(x);
  for (double& v : next.shared_var) {
    v = std::max(v / static_cast<double>(n), floor);
  }

  if (pi_mode == PiMode::kUniform) {
    next.weights.assign(k, 1.0 / static_cast<double>(k));
  } else {
    next.weights.resize(k);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      next.weights[c] = live[c] ? mass[c] / static_cast<double>(n)
                                : prev.weights[c];
      total += next.weights[c];
    }
    for (double& w : next.weights) w /= total;
  }
  return next;
}

GmmParams init_from_semantic(const FeatureMatrix& x, const ProbMatrix& y,
                             PiMode pi_mode, GmmDiagnostics* diag) {
  if (y.rows() != x.rows()) {
    throw ShapeError("semantic distribution has " + std::to_string(y.rows()) +
                     " rows, features have " + std::to_string(x.rows()));
  }
  if (diag != nullptr && x.rows() < y.cols()) {
    diag->messages.push_back("fewer samples than classes (" +
                             std::to_string(x.rows()) + " < " +
                             std::to_string(y.cols()) + ")");
  }
  return m_step_from_q(x, y, uniform_params(x, y.cols()), pi_mode, diag);
}

EmFit fit_em(const FeatureMatrix& x, GmmParams init, std::size_t max_iter,
             double tol, PiMode pi_mode, GmmDiagnostics* diag) {
  EmFit fit;
  fit.params = std::move(init);
  fit.log_likelihood = log_likelihood(x, fit.params);
  for (std::size_t it = 0; it < max_iter; ++it) {
    const ProbMatrix post = e_step(x, fit.params);
    fit.params = m_step_from_q(x, post, fit.params, pi_mode, diag);
    const double ll = log_likelihood(x, fit.params);
    const double gain = ll - fit.log_likelihood;
    fit.log_likelihood = ll;
    fit.iterations = it + 1;
    if (std::abs(gain) < tol) break;
  }
  return fit;
}

FeatureMatrix l2_normalize_rows(const FeatureMatrix& x) {
  Matrix out = x.matrix();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double ss = 0.0;
    for (double v : r) ss += v * v;
    if (ss > 0.0) {
      const double inv = 1.0 / std::sqrt(ss);
      for (double& v : r) v *= inv;
    }
  }
  return FeatureMatrix(std::move(out));
}

FeatureMatrix concat_features(std::span<const FeatureMatrix> xs) {
  if (xs.empty()) throw InvalidInputError("concat_features of empty list");
  const std::size_t n = xs[0].rows();
  std::size_t total = 0;
  for (const auto& x : xs) {
    if (x.rows() != n) {
      throw ShapeError("concat_features: row count " + std::to_string(x.rows()) +
                       " != " + std::to_string(n));
    }
    total += x.cols();
  }
  Matrix out(n, total);
  std::size_t offset = 0;
  for (const auto& x : xs) {
    const FeatureMatrix unit = l2_normalize_rows(x);
    for (std::size_t i = 0; i < n; ++i) {
      auto src = unit.row(i);
      std::copy(src.begin(), src.end(), out.row(i).begin() + offset);
    }
    offset += x.cols();
  }
  return FeatureMatrix(std::move(out));
}

}  // namespace otfusion
