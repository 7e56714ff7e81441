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

#ifndef OTFUSION_EVAL_HPP_
#define OTFUSION_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otfusion/fusion.hpp"
#include "otfusion/io.hpp"

namespace otfusion {

// Fraction of positions where pred == truth. Throws ShapeError on length
// mismatch or empty input.
double accuracy(std::span<const std::int64_t> pred,
                std::span<const std::int64_t> truth);

// Accuracy restricted to each true class; NaN for classes with no samples.
std::vector<double> per_class_accuracy(std::span<const std::int64_t> pred,
                                       std::span<const std::int64_t> truth,
                                       std::size_t n_classes);

// Method names in report order. Single-source rows are "single_vfm:<id>".
inline constexpr const char* kMethodYArgmax = "y_argmax";
inline constexpr const char* kMethodYOnly = "y_only";
inline constexpr const char* kMethodFull = "full_fusion";
inline constexpr const char* kMethodNoJoint = "no_joint";

// One dataset column of a comparison: one or more replicates (for example
// synthetic instances drawn with different seeds) whose results are averaged.
struct EvalDataset {
  std::string name;
  std::vector<Dataset> replicates;  // every replicate must carry labels
};

struct MethodOutcome {
  double accuracy = 0.0;                    // mean over replicates
  std::vector<double> per_class_accuracy;   // mean over replicates
  std::optional<double> iterations;         // fusion methods only
  std::optional<double> final_objective;
  std::optional<double> final_violation;
  double time_ms = 0.0;
};

struct Report {
  std::string baseline = kMethodYArgmax;
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  std::vector<std::vector<MethodOutcome>> outcomes;  // [method][dataset]
  FusionConfig config;
  std::size_t replicates = 1;
  bool include_timing = false;

  std::size_t method_index(const std::string& name) const;
  // accuracy(method) - accuracy(baseline) on one dataset.
  double delta(std::size_t method, std::size_t dataset) const;
  double average_accuracy(std::size_t method) const;
};

// Runs every ablation method on every dataset with identical inputs:
// y_argmax, y_only, one single_vfm per visual source, full_fusion, no_joint.
// All datasets must expose the same number of visual sources. Throws
// InvalidInputError if any replicate lacks labels.
Report compare(std::span<const EvalDataset> datasets, const FusionConfig& config);

enum class ReportFormat {
  kStructuredText,  // JSON
  kCsv,             // methods x datasets, mirrors a results table
};

// Deterministic field order, floats with 6 significant digits. Timing is
// written only when report.include_timing is set; empty per-class lists are
// omitted.
std::string render_report(const Report& report, ReportFormat format);
void emit_report(const Report& report, const std::filesystem::path& path,
                 ReportFormat format);

// Summary of a single `run` invocation, written next to its outputs.
struct RunReport {
  std::string manifest;
  std::string dataset;
  std::vector<std::string> feature_ids;
  std::vector<std::string> semantic_ids;
  FusionConfig config;
  SourceWeights weights;
  std::string method = kMethodFull;
  std::vector<TraceEntry> trace;
  std::optional<std::size_t> converged_at;
  std::vector<std::string> diagnostics;
  std::optional<double> accuracy;
  std::optional<double> time_ms;
};

std::string render_run_report(const RunReport& report);

}  // namespace otfusion

#endif  // OTFUSION_EVAL_HPP_
