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

#include "otfusion/fusion.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "otfusion/errors.hpp"

namespace otfusion {

namespace {

constexpr std::size_t kNoJointEmIters = 50;
constexpr double kNoJointEmTol = 1e-8;

double trace_product(const Matrix& q, const Matrix& m) {
  require_same_shape(q, m, "objective");
  double s = 0.0;
  const auto a = q.values();
  const auto b = m.values();
  for (std::size_t t = 0; t < a.size(); ++t) s += a[t] * b[t];
  return s;
}

// Inputs shared by both fusion variants.
struct Prepared {
  std::vector<FeatureMatrix> xs;
  SourceWeights weights;
  ProbMatrix prior;        // P(0): lambda-weighted mean of the Ys
  Matrix semantic_scores;  // sum_i lambda_i Y_i
  Marginals marginals;
};

Prepared prepare(std::span<const FeatureMatrix> xs,
                 std::span<const ProbMatrix> ys, const FusionConfig& config) {
  if (ys.empty()) throw InvalidInputError("at least one semantic source is required");
  const std::size_t n = ys[0].rows(), k = ys[0].cols();
  for (std::size_t s = 1; s < ys.size(); ++s) {
    if (ys[s].rows() != n) {
      throw ShapeError("semantic source " + std::to_string(s) + " has " +
                       std::to_string(ys[s].rows()) + " rows, expected " +
                       std::to_string(n));
    }
    if (ys[s].cols() != k) {
      throw ShapeError("semantic source " + std::to_string(s) + " has " +
                       std::to_string(ys[s].cols()) + " classes, expected " +
                       std::to_string(k));
    }
  }
  for (std::size_t s = 0; s < xs.size(); ++s) {
    if (xs[s].rows() != n) {
      throw ShapeError("visual source " + std::to_string(s) + " has " +
                       std::to_string(xs[s].rows()) + " rows, expected " +
                       std::to_string(n));
    }
  }

  validate_config(config);
  SourceWeights weights = resolve_weights(config, xs.size(), ys.size());

  std::vector<FeatureMatrix> features;
  features.reserve(xs.size());
  for (const auto& x : xs) {
    features.push_back(config.normalize_features ? l2_normalize_rows(x) : x);
  }

  Matrix semantic(n, k, 0.0);
  for (std::size_t s = 0; s < ys.size(); ++s) {
    semantic.add_scaled(ys[s].matrix(), weights.lambdas[s]);
  }
  ProbMatrix prior = row_normalize(semantic);

  Marginals marginals =
      config.col_marginal == ColMarginalMode::kFromY
          ? Marginals::with_columns(n, prior.matrix().col_sums())
          : Marginals::uniform(n, k);

  return Prepared{std::move(features), std::move(weights), std::move(prior),
                  std::move(semantic), std::move(marginals)};
}

Matrix fused_scores(const Prepared& prep, const std::vector<ProbMatrix>& ps) {
  Matrix scores = prep.semantic_scores;
  for (std::size_t s = 0; s < ps.size(); ++s) {
    scores.add_scaled(ps[s].matrix(), prep.weights.etas[s]);
  }
  return scores;
}

double weighted_objective(const Matrix& plan, const std::vector<ProbMatrix>& ps,
                          const Prepared& prep, double epsilon) {
  double value = prep.semantic_scores.empty()
                     ? 0.0
                     : trace_product(plan, prep.semantic_scores);
  for (std::size_t s = 0; s < ps.size(); ++s) {
    value += prep.weights.etas[s] * trace_product(plan, ps[s].matrix());
  }
  return value + epsilon * entropy(plan);
}

double mean_row_l1_change(const ProbMatrix& a, const ProbMatrix& b) {
  const auto x = a.matrix().values();
  const auto y = b.matrix().values();
  double s = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) s += std::abs(x[t] - y[t]);
  return s / static_cast<double>(a.rows());
}

void append_diagnostics(std::vector<std::string>& out, GmmDiagnostics& diag,
                        std::size_t source, std::size_t iteration) {
  for (auto& m : diag.messages) {
    out.push_back("source " + std::to_string(source) + ", iteration " +
                  std::to_string(iteration) + ": " + std::move(m));
  }
  diag.messages.clear();
}

}  // namespace

std::vector<double> normalize_etas(std::vector<double> etas) {
  double total = 0.0;
  for (double e : etas) {
    if (!std::isfinite(e) || e < 0.0) {
      throw InvalidInputError("eta weights must be non-negative");
    }
    total += e;
  }
  if (!(total > 0.0)) throw InvalidInputError("eta weights sum to zero");
  for (double& e : etas) e /= total;
  return etas;
}

void validate_config(const FusionConfig& config) {
  if (!(config.epsilon > 0.0) || !std::isfinite(config.epsilon)) {
    throw InvalidInputError("epsilon must be positive");
  }
  if (config.outer_iters < 1) throw InvalidInputError("outer_iters must be >= 1");
  if (config.sinkhorn_iters < 1) {
    throw InvalidInputError("sinkhorn_iters must be >= 1");
  }
  if (!(config.sinkhorn_tol >= 0.0) || !(config.outer_tol >= 0.0)) {
    throw InvalidInputError("tolerances must be non-negative");
  }
}

SourceWeights resolve_weights(const FusionConfig& config, std::size_t n_visual,
                              std::size_t n_semantic) {
  SourceWeights w;
  if (config.lambdas.empty()) {
    w.lambdas.assign(n_semantic, kDefaultLambda);
  } else if (config.lambdas.size() == 1) {
    w.lambdas.assign(n_semantic, config.lambdas[0]);
  } else if (config.lambdas.size() == n_semantic) {
    w.lambdas = config.lambdas;
  } else {
    throw InvalidInputError("got " + std::to_string(config.lambdas.size()) +
                            " lambda values for " + std::to_string(n_semantic) +
                            " semantic sources");
  }
  for (double l : w.lambdas) {
    if (!std::isfinite(l) || !(l > 0.0)) {
      throw InvalidInputError("lambda weights must be positive");
    }
  }

  if (config.etas.empty()) {
    w.etas.assign(n_visual, n_visual == 0 ? 0.0 : 1.0 / static_cast<double>(n_visual));
  } else if (config.etas.size() == n_visual) {
    double total = 0.0;
    for (double e : config.etas) {
      if (!std::isfinite(e) || e < 0.0) {
        throw InvalidInputError("eta weights must be non-negative");
      }
      total += e;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw InvalidInputError("eta weights must sum to 1, got " +
                              std::to_string(total));
    }
    w.etas = config.etas;
  } else {
    throw InvalidInputError("got " + std::to_string(config.etas.size()) +
                            " eta values for " + std::to_string(n_visual) +
                            " visual sources");
  }
  return w;
}

double objective(const Matrix& q, std::span<const Matrix> ps,
                 std::span<const Matrix> ys, const FusionConfig& config) {
  if (!(config.epsilon >= 0.0)) throw InvalidInputError("epsilon must be >= 0");
  const SourceWeights w = resolve_weights(config, ps.size(), ys.size());
  double value = 0.0;
  for (std::size_t s = 0; s < ps.size(); ++s) {
    value += w.etas[s] * trace_product(q, ps[s]);
  }
  for (std::size_t s = 0; s < ys.size(); ++s) {
    value += w.lambdas[s] * trace_product(q, ys[s]);
  }
  return value + config.epsilon * entropy(q);
}

FusionResult run(std::span<const FeatureMatrix> xs,
                 std::span<const ProbMatrix> ys, const FusionConfig& config) {
  Prepared prep = prepare(xs, ys, config);
  const std::size_t n_visual = prep.xs.size();

  std::vector<std::string> diagnostics;
  GmmDiagnostics diag;
  std::vector<GmmParams> gmms;
  gmms.reserve(n_visual);
  for (std::size_t s = 0; s < n_visual; ++s) {
    gmms.push_back(init_from_semantic(prep.xs[s], prep.prior, config.pi_mode, &diag));
    append_diagnostics(diagnostics, diag, s, 0);
  }

  std::vector<TraceEntry> trace;
  std::optional<ProbMatrix> q;
  Matrix plan;
  std::optional<std::size_t> converged_at;
  for (std::size_t t = 1; t <= config.outer_iters; ++t) {
    std::vector<ProbMatrix> ps;
    ps.reserve(n_visual);
    for (std::size_t s = 0; s < n_visual; ++s) {
      ps.push_back(e_step(prep.xs[s], gmms[s]));
    }

    SinkhornResult sk =
        sinkhorn_solve(fused_scores(prep, ps), config.epsilon, prep.marginals,
                       config.sinkhorn_iters, config.sinkhorn_tol,
                       config.sinkhorn_accel);
    ProbMatrix next = row_normalize(sk.plan);

    for (std::size_t s = 0; s < n_visual; ++s) {
      gmms[s] = m_step_from_q(prep.xs[s], next, gmms[s], config.pi_mode, &diag);
      append_diagnostics(diagnostics, diag, s, t);
    }

    TraceEntry entry;
    entry.iteration = t;
    entry.objective = weighted_objective(sk.plan, ps, prep, config.epsilon);
    entry.marginal_violation = sk.final_violation;
    entry.sinkhorn_iterations = sk.iterations_used;
    if (q) entry.q_change = mean_row_l1_change(next, *q);
    trace.push_back(entry);

    q = std::move(next);
    plan = std::move(sk.plan);
    if (entry.q_change && *entry.q_change < config.outer_tol) {
      converged_at = t;
      break;
    }
  }

  return FusionResult{std::move(*q),        std::move(plan),
                      std::move(gmms),      std::move(trace),
                      converged_at,         std::move(diagnostics)};
}

FusionResult run_no_joint(std::span<const FeatureMatrix> xs,
                          std::span<const ProbMatrix> ys,
                          const FusionConfig& config) {
  Prepared prep = prepare(xs, ys, config);
  const std::size_t n_visual = prep.xs.size();

  std::vector<std::string> diagnostics;
  GmmDiagnostics diag;
  std::vector<GmmParams> gmms;
  std::vector<ProbMatrix> ps;
  for (std::size_t s = 0; s < n_visual; ++s) {
    GmmParams init =
        init_from_semantic(prep.xs[s], prep.prior, config.pi_mode, &diag);
    EmFit fit = fit_em(prep.xs[s], std::move(init), kNoJointEmIters,
                       kNoJointEmTol, config.pi_mode, &diag);
    append_diagnostics(diagnostics, diag, s, 0);
    ps.push_back(e_step(prep.xs[s], fit.params));
    gmms.push_back(std::move(fit.params));
  }

  SinkhornResult sk =
      sinkhorn_solve(fused_scores(prep, ps), config.epsilon, prep.marginals,
                     config.sinkhorn_iters, config.sinkhorn_tol,
                     config.sinkhorn_accel);
  TraceEntry entry;
  entry.iteration = 1;
  entry.objective = weighted_objective(sk.plan, ps, prep, config.epsilon);
  entry.marginal_violation = sk.final_violation;
  entry.sinkhorn_iterations = sk.iterations_used;

  ProbMatrix q = row_normalize(sk.plan);
  return FusionResult{std::move(q),    std::move(sk.plan), std::move(gmms),
                      {entry},         std::nullopt,       std::move(diagnostics)};
}

std::vector<std::int64_t> predict(const ProbMatrix& q) {
  std::vector<std::int64_t> labels(q.rows(), 0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto r = q.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j) {
      if (r[j] > r[best]) best = j;
    }
    labels[i] = static_cast<std::int64_t>(best);
  }
  return labels;
}

}  // namespace otfusion
