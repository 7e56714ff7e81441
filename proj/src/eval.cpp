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

#include "otfusion/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "otfusion/errors.hpp"

namespace otfusion {

using Json = nlohmann::ordered_json;

namespace {

double sig6(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

std::string sig6_text(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Json number_or_null(double v) {
  return std::isfinite(v) ? Json(sig6(v)) : Json(nullptr);
}

const char* col_marginal_name(ColMarginalMode m) {
  return m == ColMarginalMode::kFromY ? "from-y" : "uniform";
}

Json config_json(const FusionConfig& c) {
  Json j;
  j["epsilon"] = c.epsilon;
  j["lambdas"] = c.lambdas;
  j["etas"] = c.etas;
  j["outer_iters"] = c.outer_iters;
  j["sinkhorn_iters"] = c.sinkhorn_iters;
  j["sinkhorn_tol"] = c.sinkhorn_tol;
  j["outer_tol"] = c.outer_tol;
  j["col_marginal"] = col_marginal_name(c.col_marginal);
  j["normalize_features"] = c.normalize_features;
  j["pi_mode"] = c.pi_mode == PiMode::kEstimate ? "estimate" : "uniform";
  j["sinkhorn_accel"] = c.sinkhorn_accel == Acceleration::kAdaptiveOverrelaxation
                            ? "overrelax"
                            : "none";
  j["seed"] = c.seed;
  return j;
}

std::vector<std::int64_t> semantic_argmax(const Dataset& d,
                                          const FusionConfig& config) {
  const SourceWeights w = resolve_weights(config, 0, d.semantic.size());
  Matrix mix(d.semantic[0].rows(), d.semantic[0].cols(), 0.0);
  for (std::size_t s = 0; s < d.semantic.size(); ++s) {
    mix.add_scaled(d.semantic[s].matrix(), w.lambdas[s]);
  }
  return predict(row_normalize(mix));
}

struct Accumulator {
  double accuracy = 0.0;
  std::vector<double> per_class;
  std::vector<std::size_t> per_class_count;
  double iterations = 0.0, objective = 0.0, violation = 0.0;
  bool has_trace = false;
  double time_ms = 0.0;
  std::size_t count = 0;

  void add(const std::vector<std::int64_t>& pred, const Dataset& d,
           std::size_t k, const FusionResult* fr, double ms) {
    accuracy += otfusion::accuracy(pred, *d.labels);
    const auto pc = per_class_accuracy(pred, *d.labels, k);
    per_class.resize(k, 0.0);
    per_class_count.resize(k, 0);
    for (std::size_t c = 0; c < k; ++c) {
      if (!std::isnan(pc[c])) {
        per_class[c] += pc[c];
        ++per_class_count[c];
      }
    }
    if (fr != nullptr && !fr->trace.empty()) {
      has_trace = true;
      iterations += static_cast<double>(fr->trace.size());
      objective += fr->trace.back().objective;
      violation += fr->trace.back().marginal_violation;
    }
    time_ms += ms;
    ++count;
  }

  MethodOutcome finish() const {
    const double n = static_cast<double>(count);
    MethodOutcome o;
    o.accuracy = accuracy / n;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
      o.per_class_accuracy.push_back(
          per_class_count[c] == 0
              ? std::numeric_limits<double>::quiet_NaN()
              : per_class[c] / static_cast<double>(per_class_count[c]));
    }
    if (has_trace) {
      o.iterations = iterations / n;
      o.final_objective = objective / n;
      o.final_violation = violation / n;
    }
    o.time_ms = time_ms / n;
    return o;
  }
};

}  // namespace

double accuracy(std::span<const std::int64_t> pred,
                std::span<const std::int64_t> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("accuracy: " + std::to_string(pred.size()) +
                     " predictions vs " + std::to_string(truth.size()) +
                     " labels");
  }
  if (pred.empty()) throw ShapeError("accuracy of empty label vectors");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::vector<double> per_class_accuracy(std::span<const std::int64_t> pred,
                                       std::span<const std::int64_t> truth,
                                       std::size_t n_classes) {
  if (pred.size() != truth.size()) throw ShapeError("per_class_accuracy: length mismatch");
  std::vector<std::size_t> hits(n_classes, 0), total(n_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto c = static_cast<std::size_t>(truth[i]);
    if (truth[i] < 0 || c >= n_classes) continue;
    ++total[c];
    hits[c] += pred[i] == truth[i];
  }
  std::vector<double> out(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    out[c] = total[c] == 0 ? std::numeric_limits<double>::quiet_NaN()
                           : static_cast<double>(hits[c]) /
                                 static_cast<double>(total[c]);
  }
  return out;
}

std::size_t Report::method_index(const std::string& name) const {
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (methods[m] == name) return m;
  }
  throw InvalidInputError("report has no method '" + name + "'");
}

double Report::delta(std::size_t method, std::size_t dataset) const {
  return outcomes[method][dataset].accuracy -
         outcomes[method_index(baseline)][dataset].accuracy;
}

double Report::average_accuracy(std::size_t method) const {
  double s = 0.0;
  for (const auto& o : outcomes[method]) s += o.accuracy;
  return s / static_cast<double>(outcomes[method].size());
}

Report compare(std::span<const EvalDataset> datasets, const FusionConfig& config) {
  if (datasets.empty()) throw InvalidInputError("compare needs at least one dataset");
  for (const auto& ds : datasets) {
    if (ds.replicates.empty()) {
      throw InvalidInputError("dataset '" + ds.name + "' has no replicates");
    }
  }
  const std::size_t n_visual = datasets[0].replicates[0].features.size();
  for (const auto& ds : datasets) {
    for (const auto& rep : ds.replicates) {
      if (!rep.labels) {
        throw InvalidInputError("dataset '" + ds.name + "' has no labels");
      }
      if (rep.features.size() != n_visual) {
        throw InvalidInputError("every dataset must have the same number of "
                                "visual sources");
      }
    }
  }

  Report report;
  report.config = config;
  report.replicates = datasets[0].replicates.size();
  report.methods = {kMethodYArgmax, kMethodYOnly};
  for (std::size_t s = 0; s < n_visual; ++s) {
    const auto& ids = datasets[0].replicates[0].feature_ids;
    report.methods.push_back("single_vfm:" +
                             (s < ids.size() ? ids[s] : std::to_string(s)));
  }
  report.methods.push_back(kMethodFull);
  report.methods.push_back(kMethodNoJoint);
  report.outcomes.assign(report.methods.size(), {});

  FusionConfig single = config;
  single.etas = {1.0};
  FusionConfig semantic_only = config;
  semantic_only.etas.clear();

  using Clock = std::chrono::steady_clock;
  auto elapsed_ms = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  for (const auto& ds : datasets) {
    report.datasets.push_back(ds.name);
    std::vector<Accumulator> acc(report.methods.size());
    for (const auto& rep : ds.replicates) {
      const std::size_t k = rep.semantic.at(0).cols();
      std::size_t m = 0;

      auto t0 = Clock::now();
      acc[m++].add(semantic_argmax(rep, config), rep, k, nullptr, elapsed_ms(t0));

      t0 = Clock::now();
      FusionResult r = run({}, rep.semantic, semantic_only);
      acc[m++].add(predict(r.q), rep, k, &r, elapsed_ms(t0));

      for (std::size_t s = 0; s < n_visual; ++s) {
        t0 = Clock::now();
        r = run(std::span(rep.features).subspan(s, 1), rep.semantic, single);
        acc[m++].add(predict(r.q), rep, k, &r, elapsed_ms(t0));
      }

      t0 = Clock::now();
      r = run(rep.features, rep.semantic, config);
      acc[m++].add(predict(r.q), rep, k, &r, elapsed_ms(t0));

      t0 = Clock::now();
      r = run_no_joint(rep.features, rep.semantic, config);
      acc[m++].add(predict(r.q), rep, k, &r, elapsed_ms(t0));
    }
    for (std::size_t m = 0; m < acc.size(); ++m) {
      report.outcomes[m].push_back(acc[m].finish());
    }
  }
  return report;
}

std::string render_report(const Report& report, ReportFormat format) {
  const std::size_t base = report.method_index(report.baseline);
  if (format == ReportFormat::kCsv) {
    std::ostringstream out;
    out << "method";
    for (const auto& d : report.datasets) out << "," << d;
    out << ",average\n";
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
      out << report.methods[m];
      for (const auto& o : report.outcomes[m]) out << "," << sig6_text(o.accuracy);
      out << "," << sig6_text(report.average_accuracy(m)) << "\n";
    }
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
      if (m == base) continue;
      out << "delta:" << report.methods[m];
      for (std::size_t d = 0; d < report.datasets.size(); ++d) {
        out << "," << sig6_text(report.delta(m, d));
      }
      out << ","
          << sig6_text(report.average_accuracy(m) - report.average_accuracy(base))
          << "\n";
    }
    return out.str();
  }

  Json j;
  j["baseline"] = report.baseline;
  j["replicates"] = report.replicates;
  j["datasets"] = report.datasets;
  j["config"] = config_json(report.config);
  Json methods = Json::array();
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    Json mj;
    mj["name"] = report.methods[m];
    Json accs, deltas;
    for (std::size_t d = 0; d < report.datasets.size(); ++d) {
      accs[report.datasets[d]] = number_or_null(report.outcomes[m][d].accuracy);
      deltas[report.datasets[d]] = number_or_null(report.delta(m, d));
    }
    mj["accuracy"] = accs;
    mj["average_accuracy"] = number_or_null(report.average_accuracy(m));
    mj["delta"] = deltas;
    mj["average_delta"] = number_or_null(report.average_accuracy(m) -
                                         report.average_accuracy(base));
    Json per_class, traces, timing;
    for (std::size_t d = 0; d < report.datasets.size(); ++d) {
      const MethodOutcome& o = report.outcomes[m][d];
      if (!o.per_class_accuracy.empty()) {
        Json pc = Json::array();
        for (double v : o.per_class_accuracy) pc.push_back(number_or_null(v));
        per_class[report.datasets[d]] = pc;
      }
      if (o.iterations) {
        traces[report.datasets[d]] = {
            {"iterations", number_or_null(*o.iterations)},
            {"final_objective", number_or_null(*o.final_objective)},
            {"final_violation", number_or_null(*o.final_violation)}};
      }
      timing[report.datasets[d]] = std::round(o.time_ms);
    }
    if (!per_class.is_null()) mj["per_class_accuracy"] = per_class;
    if (!traces.is_null()) mj["trace"] = traces;
    if (report.include_timing) mj["time_ms"] = timing;
    methods.push_back(mj);
  }
  j["methods"] = methods;
  return j.dump(2) + "\n";
}

void emit_report(const Report& report, const std::filesystem::path& path,
                 ReportFormat format) {
  const std::string text = render_report(report, format);
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

std::string render_run_report(const RunReport& r) {
  Json j;
  j["method"] = r.method;
  j["manifest"] = r.manifest;
  j["dataset"] = r.dataset;
  j["feature_sources"] = r.feature_ids;
  j["semantic_sources"] = r.semantic_ids;
  j["config"] = config_json(r.config);
  j["resolved_weights"] = {{"lambdas", r.weights.lambdas}, {"etas", r.weights.etas}};
  Json trace = Json::array();
  for (const auto& t : r.trace) {
    Json e;
    e["iteration"] = t.iteration;
    e["objective"] = number_or_null(t.objective);
    e["q_change"] = t.q_change ? number_or_null(*t.q_change) : Json(nullptr);
    e["marginal_violation"] = number_or_null(t.marginal_violation);
    e["sinkhorn_iterations"] = t.sinkhorn_iterations;
    trace.push_back(e);
  }
  j["trace"] = trace;
  j["iterations"] = r.trace.size();
  j["converged_at"] = r.converged_at ? Json(*r.converged_at) : Json(nullptr);
  if (!r.trace.empty()) {
    j["final_objective"] = number_or_null(r.trace.back().objective);
    j["final_violation"] = number_or_null(r.trace.back().marginal_violation);
  }
  j["diagnostics"] = r.diagnostics;
  if (r.accuracy) j["accuracy"] = number_or_null(*r.accuracy);
  if (r.time_ms) j["time_ms"] = std::round(*r.time_ms);
  return j.dump(2) + "\n";
}

}  // namespace otfusion
