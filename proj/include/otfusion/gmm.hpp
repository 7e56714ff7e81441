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

#ifndef OTFUSION_GMM_HPP_
#define OTFUSION_GMM_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "otfusion/matrix.hpp"
#include "otfusion/prob_core.hpp"

namespace otfusion {

// How mixture weights evolve across M-steps.
enum class PiMode {
  kUniform,   // pi_k = 1/K, never updated
  kEstimate,  // pi_k = mean_i Q_ik
};

// Gaussian mixture with K components sharing one diagonal covariance.
struct GmmParams {
  Matrix means;                    // K x D
  std::vector<double> shared_var;  // D, per-dimension variance
  std::vector<double> weights;     // K

  std::size_t components() const { return means.rows(); }
  std::size_t dim() const { return means.cols(); }

  friend bool operator==(const GmmParams&, const GmmParams&) = default;
};

// Non-fatal conditions observed while fitting (empty clusters and the like).
struct GmmDiagnostics {
  std::vector<std::string> messages;
};

// Lower bound applied to every shared-variance entry:
// 1e-6 * mean per-dimension variance of x, but never below 1e-12.
double variance_floor(const FeatureMatrix& x);

// Every mean at the global mean, shared variance equal to the (floored)
// per-dimension variance of x, uniform weights.
GmmParams uniform_params(const FeatureMatrix& x, std::size_t k);

// Posterior responsibilities P_ik = pi_k N(x_i; mu_k, diag(var)) / sum_j ...,
// evaluated in log space. Weights are normalized internally, so any positive
// rescaling of them is harmless.
ProbMatrix e_step(const FeatureMatrix& x, const GmmParams& params);

// sum_i log sum_k pi_k N(x_i; mu_k, diag(var)).
double log_likelihood(const FeatureMatrix& x, const GmmParams& params);

// M-step driven by an arbitrary soft assignment Q (N x K):
//   mu_k  = sum_i Q_ik x_i / sum_i Q_ik
//   var_d = (1/N) sum_i sum_k Q_ik (x_id - mu_kd)^2, floored.
// A component with column mass below 1e-12 keeps its previous mean and is
// left out of the variance sum; a message is appended to `diag` if given.
GmmParams m_step_from_q(const FeatureMatrix& x, const ProbMatrix& q,
                        const GmmParams& prev, PiMode pi_mode = PiMode::kUniform,
                        GmmDiagnostics* diag = nullptr);

// Parameters estimated with the semantic distribution Y standing in for the
// initial posteriors, i.e. m_step_from_q(x, y, uniform_params(x, K)).
GmmParams init_from_semantic(const FeatureMatrix& x, const ProbMatrix& y,
                             PiMode pi_mode = PiMode::kUniform,
                             GmmDiagnostics* diag = nullptr);

struct EmFit {
  GmmParams params;
  std::size_t iterations = 0;
  double log_likelihood = 0.0;
};

// Classical EM (e_step followed by an M-step on its own posteriors) until
// the log-likelihood gain drops below `tol` or `max_iter` is reached.
EmFit fit_em(const FeatureMatrix& x, GmmParams init, std::size_t max_iter = 50,
             double tol = 1e-8, PiMode pi_mode = PiMode::kUniform,
             GmmDiagnostics* diag = nullptr);

// Scales each row to unit L2 norm; all-zero rows are left untouched.
FeatureMatrix l2_normalize_rows(const FeatureMatrix& x);

// Column-wise concatenation of row-normalized inputs, in argument order.
FeatureMatrix concat_features(std::span<const FeatureMatrix> xs);

}  // namespace otfusion

#endif  // OTFUSION_GMM_HPP_
