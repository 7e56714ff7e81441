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

#ifndef OTFUSION_FUSION_HPP_
#define OTFUSION_FUSION_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otfusion/gmm.hpp"
#include "otfusion/matrix.hpp"
#include "otfusion/prob_core.hpp"
#include "otfusion/sinkhorn.hpp"

namespace otfusion {

enum class ColMarginalMode {
  kUniform,  // c_j = 1/K
  kFromY,    // c_j proportional to the column sums of the semantic prior
};

inline constexpr double kDefaultEpsilon = 0.01;
inline constexpr double kDefaultLambda = 0.8;

struct FusionConfig {
  double epsilon = kDefaultEpsilon;
  // One weight per semantic source. Empty means kDefaultLambda for each; a
  // single value is broadcast to every source.
  std::vector<double> lambdas;
  // One weight per visual source, summing to one. Empty means uniform.
  std::vector<double> etas;
  std::size_t outer_iters = 10;
  std::size_t sinkhorn_iters = 3;
  double sinkhorn_tol = 1e-9;
  double outer_tol = 1e-4;
  ColMarginalMode col_marginal = ColMarginalMode::kUniform;
  bool normalize_features = true;
  PiMode pi_mode = PiMode::kUniform;
  Acceleration sinkhorn_accel = Acceleration::kNone;
  std::uint64_t seed = 0;
};

// Per-source weights after defaults and broadcasting are applied.
struct SourceWeights {
  std::vector<double> lambdas;
  std::vector<double> etas;
};

// Throws InvalidInputError unless epsilon > 0, both iteration counts are at
// least one and the tolerances are non-negative.
void validate_config(const FusionConfig& config);

// Expands lambdas/etas for the given source counts: lambdas > 0, etas >= 0
// summing to one within 1e-12. Throws InvalidInputError on violation.
SourceWeights resolve_weights(const FusionConfig& config, std::size_t n_visual,
                              std::size_t n_semantic);

// Divides by the sum; throws InvalidInputError unless all entries are
// non-negative with a positive sum.
std::vector<double> normalize_etas(std::vector<double> etas);

struct TraceEntry {
  std::size_t iteration = 0;  // 1-based
  double objective = 0.0;
  // Mean per-row L1 change of Q against the previous iteration; absent on
  // the first iteration.
  std::optional<double> q_change;
  double marginal_violation = 0.0;
  std::size_t sinkhorn_iterations = 0;
};

struct FusionResult {
  ProbMatrix q;  // row-stochastic prediction distribution
  Matrix plan;   // last transport plan (total mass one)
  std::vector<GmmParams> gmms;  // one per visual source
  std::vector<TraceEntry> trace;
  std::optional<std::size_t> converged_at;  // 1-based iteration
  std::vector<std::string> diagnostics;
};

// sum_i eta_i Tr(Q^T P_i) + sum_i lambda_i Tr(Q^T Y_i) + epsilon H(Q), with
// Q in plan normalization. epsilon = 0 is accepted here.
double objective(const Matrix& q, std::span<const Matrix> ps,
                 std::span<const Matrix> ys, const FusionConfig& config);

// Alternating optimization: semantic initialization of one GMM per visual
// source, then for each outer iteration an E-step per source, a Sinkhorn
// projection of S = sum eta_i P_i + sum lambda_i Y_i, and an M-step per
// source driven by Q. Stops early when the mean per-row L1 change of Q drops
// below outer_tol. `xs` may be empty (semantic-only fusion).
FusionResult run(std::span<const FeatureMatrix> xs,
                 std::span<const ProbMatrix> ys, const FusionConfig& config);

// Ablation without joint learning: every GMM is fit by classical EM (50
// iterations or log-likelihood gain below 1e-8) from the semantic start,
// then a single Sinkhorn fusion combines the resulting posteriors with Y.
FusionResult run_no_joint(std::span<const FeatureMatrix> xs,
                          std::span<const ProbMatrix> ys,
                          const FusionConfig& config);

// Per-row argmax; ties go to the lowest class index.
std::vector<std::int64_t> predict(const ProbMatrix& q);

}  // namespace otfusion

#endif  // OTFUSION_FUSION_HPP_
