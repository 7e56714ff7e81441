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

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <utility>

#include <CLI11.hpp>

#include "otfusion/errors.hpp"
#include "otfusion/eval.hpp"
#include "otfusion/fusion.hpp"
#include "otfusion/io.hpp"

namespace otfusion::cli {

namespace fs = std::filesystem;

namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes text_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

// Stages every file as "<path>.partial" and renames them only once all have
// been written, so a failure leaves no output behind.
void commit_files(const std::vector<std::pair<fs::path, Bytes>>& files) {
  std::vector<fs::path> staged;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : staged) fs::remove(p, ec);
  };
  try {
    for (const auto& [path, bytes] : files) {
      fs::path tmp = path;
      tmp += ".partial";
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw PathError("cannot write " + path.string());
      staged.push_back(tmp);
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
      out.close();
      if (!out) throw PathError("write failed for " + path.string());
    }
    for (std::size_t f = 0; f < files.size(); ++f) {
      std::error_code ec;
      fs::rename(staged[f], files[f].first, ec);
      if (ec) throw PathError("cannot rename into " + files[f].first.string());
    }
  } catch (...) {
    cleanup();
    throw;
  }
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw PathError("cannot create output directory " + dir.string());
  }
}

// Flags shared by run and compare; mirrors FusionConfig.
struct FusionFlags {
  double epsilon = kDefaultEpsilon;
  std::vector<double> lambdas;
  std::vector<double> etas;
  std::size_t iters = 10;
  std::size_t sinkhorn_iters = 3;
  double sinkhorn_tol = 1e-9;
  double outer_tol = 1e-4;
  std::string col_marginal = "uniform";
  std::string pi_mode = "uniform";
  bool no_normalize = false;
  bool overrelax = false;

  void attach(CLI::App* app) {
    app->add_option("--epsilon", epsilon, "entropy weight")->capture_default_str();
    app->add_option("--lambda", lambdas,
                    "semantic weight, repeatable per source (default 0.8)");
    app->add_option("--eta", etas,
                    "visual weight, repeatable per source; normalized to sum 1");
    app->add_option("--iters", iters, "outer iterations T")->capture_default_str();
    app->add_option("--sinkhorn-iters", sinkhorn_iters,
                    "Sinkhorn sweeps per outer iteration")
        ->capture_default_str();
    app->add_option("--sinkhorn-tol", sinkhorn_tol)->capture_default_str();
    app->add_option("--outer-tol", outer_tol, "mean per-row L1 change of Q")
        ->capture_default_str();
    app->add_option("--col-marginal", col_marginal)
        ->check(CLI::IsMember({"uniform", "from-y"}))
        ->capture_default_str();
    app->add_option("--pi-mode", pi_mode)
        ->check(CLI::IsMember({"uniform", "estimate"}))
        ->capture_default_str();
    app->add_flag("--no-normalize-features", no_normalize,
                  "skip L2 row normalization of features");
    app->add_flag("--sinkhorn-overrelax", overrelax,
                  "adaptive over-relaxation inside Sinkhorn");
  }

  FusionConfig config() const {
    FusionConfig c;
    c.epsilon = epsilon;
    c.lambdas = lambdas;
    c.etas = etas.empty() ? etas : normalize_etas(etas);
    c.outer_iters = iters;
    c.sinkhorn_iters = sinkhorn_iters;
    c.sinkhorn_tol = sinkhorn_tol;
    c.outer_tol = outer_tol;
    c.col_marginal =
        col_marginal == "from-y" ? ColMarginalMode::kFromY : ColMarginalMode::kUniform;
    c.pi_mode = pi_mode == "estimate" ? PiMode::kEstimate : PiMode::kUniform;
    c.normalize_features = !no_normalize;
    c.sinkhorn_accel =
        overrelax ? Acceleration::kAdaptiveOverrelaxation : Acceleration::kNone;
    return c;
  }
};

struct RunFlags {
  std::string manifest;
  std::string out;
  std::string method = "full";
  bool timing = false;
  FusionFlags fusion;
};

int cmd_run(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  const FusionConfig config = flags.fusion.config();
  const Manifest manifest = load_manifest(flags.manifest);
  const Dataset data = load_dataset(manifest);

  const auto t0 = std::chrono::steady_clock::now();
  const FusionResult result = flags.method == "no-joint"
                                  ? run_no_joint(data.features, data.semantic, config)
                                  : run(data.features, data.semantic, config);
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  for (const auto& t : result.trace) {
    char change[32] = "-";
    if (t.q_change) std::snprintf(change, sizeof change, "%.3g", *t.q_change);
    char line[160];
    std::snprintf(line, sizeof line,
                  "iter %zu objective %.6g violation %.3g q_change %s\n",
                  t.iteration, t.objective, t.marginal_violation, change);
    err << line;
  }

  const auto labels = predict(result.q);
  RunReport report;
  report.manifest = flags.manifest;
  report.dataset = data.name;
  report.feature_ids = data.feature_ids;
  for (const auto& s : manifest.semantic_files) report.semantic_ids.push_back(s.id);
  report.config = config;
  report.weights =
      resolve_weights(config, data.features.size(), data.semantic.size());
  report.method = flags.method == "no-joint" ? kMethodNoJoint : kMethodFull;
  report.trace = result.trace;
  report.converged_at = result.converged_at;
  report.diagnostics = result.diagnostics;
  if (data.labels) report.accuracy = accuracy(labels, *data.labels);
  if (flags.timing) report.time_ms = ms;

  const fs::path dir(flags.out);
  ensure_directory(dir);
  commit_files({{dir / "q.otm", encode_matrix(result.q.matrix(), DType::kFloat64)},
                {dir / "predictions.otm", encode_labels(labels)},
                {dir / "report.json", text_bytes(render_run_report(report))}});
  out << "wrote " << (dir / "q.otm").string() << ", "
      << (dir / "predictions.otm").string() << ", "
      << (dir / "report.json").string() << "\n";
  if (report.accuracy) out << "accuracy " << *report.accuracy << "\n";
  return kExitOk;
}

struct SynthFlags {
  SynthSpec spec;
  std::string dtype = "f64";
  std::string out;
};

int cmd_synth(const SynthFlags& flags, std::ostream& out) {
  const SynthInstance inst = generate(flags.spec);
  const DType dtype = flags.dtype == "f32" ? DType::kFloat32 : DType::kFloat64;
  const fs::path dir(flags.out);
  ensure_directory(dir);

  Manifest m;
  m.name = "synth-seed" + std::to_string(flags.spec.seed);
  m.feature_files.push_back({"synth", "features.otm"});
  m.semantic_files.push_back({"synth", "semantic.otm"});
  m.labels_path = "labels.otm";
  for (std::size_t c = 0; c < flags.spec.n_classes; ++c) {
    m.class_names.push_back("class_" + std::to_string(c));
  }
  commit_files({{dir / "features.otm", encode_matrix(inst.features.matrix(), dtype)},
                {dir / "semantic.otm", encode_matrix(inst.semantic.matrix(), dtype)},
                {dir / "labels.otm", encode_labels(inst.labels)},
                {dir / "manifest.txt", text_bytes(format_manifest(m))}});
  out << "wrote " << (dir / "manifest.txt").string() << "\n";
  return kExitOk;
}

struct CompareFlags {
  std::vector<std::string> manifests;
  std::string synth;
  std::size_t seeds = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  bool timing = false;
  FusionFlags fusion;
};

int cmd_compare(const CompareFlags& flags, std::ostream& out) {
  FusionConfig config = flags.fusion.config();
  config.seed = flags.seed;
  if (flags.seeds < 1) throw InvalidInputError("--seeds must be >= 1");
  if (flags.manifests.empty() == flags.synth.empty()) {
    throw InvalidInputError("give either --manifest or --synth");
  }

  std::vector<EvalDataset> datasets;
  if (!flags.synth.empty()) {
    SynthSpec spec = parse_synth_spec(flags.synth);
    EvalDataset ds{"synth", {}};
    for (std::size_t s = 0; s < flags.seeds; ++s) {
      spec.seed = flags.seed + s;
      SynthInstance inst = generate(spec);
      ds.replicates.push_back(Dataset{"synth-seed" + std::to_string(spec.seed),
                                      {"synth"},
                                      {std::move(inst.features)},
                                      {std::move(inst.semantic)},
                                      std::move(inst.labels)});
    }
    datasets.push_back(std::move(ds));
  } else {
    if (flags.seeds != 1) {
      throw InvalidInputError(
          "--seeds applies to --synth; manifest inputs are deterministic");
    }
    for (const auto& path : flags.manifests) {
      const Manifest m = load_manifest(path);
      Dataset d = load_dataset(m);
      if (!d.labels) {
        throw InvalidInputError("manifest " + path + " has no labels");
      }
      datasets.push_back(EvalDataset{d.name, {std::move(d)}});
    }
  }

  Report report = compare(datasets, config);
  report.include_timing = flags.timing;
  emit_report(report, flags.out,
              flags.format == "csv" ? ReportFormat::kCsv
                                    : ReportFormat::kStructuredText);
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    char line[160];
    std::snprintf(line, sizeof line, "%-28s %.6g\n", report.methods[m].c_str(),
                  report.average_accuracy(m));
    out << line;
  }
  return kExitOk;
}

int cmd_inspect(const std::string& file, std::ostream& out) {
  const MatrixFileHeader h = read_header(file);
  out << "file: " << file << "\n";
  out << "magic: OTM1\nversion: " << MatrixFileHeader::kVersion << "\n";
  out << "shape: " << h.rows << " x " << h.cols << "\n";
  out << "dtype: " << static_cast<int>(h.dtype) << " (" << dtype_name(h.dtype)
      << ")\n";
  out << "bytes: " << MatrixFileHeader::kSize + h.rows * h.cols * h.element_size()
      << "\n";
  if (h.dtype == DType::kInt64) {
    const auto labels = read_labels(file);
    if (!labels.empty()) {
      const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
      out << "values: min " << *lo << " max " << *hi << "\n";
    }
    return kExitOk;
  }
  const Matrix m = read_matrix(file);
  out << "finite: " << (m.all_finite() ? "yes" : "no") << "\n";
  if (m.rows() > 0 && m.cols() > 0) {
    const auto sums = m.row_sums();
    double lo = sums[0], hi = sums[0], dev = 0.0;
    for (double s : sums) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      dev = std::max(dev, std::abs(s - 1.0));
    }
    char line[200];
    std::snprintf(line, sizeof line,
                  "row sums: min %.9g max %.9g max |rowsum - 1| %.3g\n", lo, hi,
                  dev);
    out << line;
  }
  return kExitOk;
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw InvalidInputError("synth spec entry '" + item + "' lacks '='");
    }
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    try {
      std::size_t used = 0;
      auto as_size = [&] {
        const long long v = std::stoll(value, &used);
        if (v < 0) throw std::invalid_argument("negative");
        return static_cast<std::size_t>(v);
      };
      auto as_double = [&] { return std::stod(value, &used); };
      if (key == "n") spec.n_samples = as_size();
      else if (key == "k") spec.n_classes = as_size();
      else if (key == "d") spec.dim = as_size();
      else if (key == "separation") spec.separation = as_double();
      else if (key == "y_noise") spec.y_noise = as_double();
      else if (key == "y_temperature") spec.y_temperature = as_double();
      else if (key == "l2_normalize") spec.l2_normalize = as_size() != 0;
      else throw InvalidInputError("unknown synth spec key '" + key + "'");
      if (used != value.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw InvalidInputError("bad value for synth spec key '" + key + "'");
    }
  }
  return spec;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Training-free fusion of vision and vision-language predictions"};
  app.name("otfusion");
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "fuse the sources of one manifest");
  run_cmd->add_option("--manifest", run_flags.manifest)->required();
  run_cmd->add_option("--out", run_flags.out, "output directory")->required();
  run_cmd->add_option("--method", run_flags.method)
      ->check(CLI::IsMember({"full", "no-joint"}))
      ->capture_default_str();
  run_cmd->add_flag("--timing", run_flags.timing, "record wall-clock time");
  run_flags.fusion.attach(run_cmd);

  CompareFlags cmp_flags;
  auto* cmp_cmd = app.add_subcommand("compare", "evaluate every ablation method");
  cmp_cmd->add_option("--manifest", cmp_flags.manifests, "repeatable");
  cmp_cmd->add_option("--synth", cmp_flags.synth,
                      "synthetic instance spec, e.g. n=1000,k=10,d=32");
  cmp_cmd->add_option("--seeds", cmp_flags.seeds, "synthetic replicates")
      ->capture_default_str();
  cmp_cmd->add_option("--seed", cmp_flags.seed, "first synthetic seed")
      ->capture_default_str();
  cmp_cmd->add_option("--out", cmp_flags.out, "report path")->required();
  cmp_cmd->add_option("--format", cmp_flags.format)
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  cmp_cmd->add_flag("--timing", cmp_flags.timing, "record wall-clock time");
  cmp_flags.fusion.attach(cmp_cmd);

  SynthFlags syn_flags;
  auto* syn_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  syn_cmd->add_option("--n", syn_flags.spec.n_samples)->capture_default_str();
  syn_cmd->add_option("--k", syn_flags.spec.n_classes)->capture_default_str();
  syn_cmd->add_option("--d", syn_flags.spec.dim)->capture_default_str();
  syn_cmd->add_option("--separation", syn_flags.spec.separation)
      ->capture_default_str();
  syn_cmd->add_option("--y-noise", syn_flags.spec.y_noise)->capture_default_str();
  syn_cmd->add_option("--y-temperature", syn_flags.spec.y_temperature)
      ->capture_default_str();
  syn_cmd->add_flag("--l2-normalize", syn_flags.spec.l2_normalize);
  syn_cmd->add_option("--seed", syn_flags.spec.seed)->capture_default_str();
  syn_cmd->add_option("--dtype", syn_flags.dtype)
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  syn_cmd->add_option("--out", syn_flags.out, "output directory")->required();

  std::string inspect_file;
  auto* ins_cmd = app.add_subcommand("inspect", "describe an .otm file");
  ins_cmd->add_option("--file", inspect_file)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "otfusion: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_flags, out, err);
    if (cmp_cmd->parsed()) return cmd_compare(cmp_flags, out);
    if (syn_cmd->parsed()) return cmd_synth(syn_flags, out);
    if (ins_cmd->parsed()) return cmd_inspect(inspect_file, out);
  } catch (const Error& e) {
    err << "otfusion: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "otfusion: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace otfusion::cli
