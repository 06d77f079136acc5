#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "aquaghost/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aquaghost;

namespace {

constexpr int kExitCellError = 1;
constexpr int kExitSpecError = 2;

// Spec keys that may be overridden from the command line as `--<key> VALUE`.
const char* const kScalarKeys[] = {
    "scene_path", "scene_kind", "scene_sparsity", "scene_seed", "photon_pair_rate", "detector_efficiency",
    "coincidence_window", "gating_suppression", "pattern_kind", "m_ratio", "transform", "sparsity_k",
    "sparsity_ratio", "greedy_max_iterations", "greedy_residual_tol", "lambda_reg", "lambda_relative",
    "ista_max_iterations", "ista_residual_tol", "exposure_per_pattern", "subtract_accidentals", "postprocess",
    "seeds", "export_conditioning", "write_measurements", "record_timings"};
// Comma-separated lists.
const char* const kListKeys[] = {"sources", "resolutions", "solvers"};

json scalar_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded() || v.is_object() || v.is_array()) return text;
  return v;
}

json list_value(const std::string& text) {
  json out = json::array();
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(scalar_value(item));
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::SpecError, "cannot open spec " + path.string());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

struct RunOptions {
  std::string spec_path;
  std::string out;
  std::string channel;
  std::optional<std::uint64_t> seed;
  bool noiseless = false;
  bool quiet = false;
  std::map<std::string, std::string> overrides;
};

int run_command(const RunOptions& opt) {
  ExperimentSpec spec;
  try {
    json j = json::object();
    if (!opt.spec_path.empty()) {
      j = json::parse(read_text(opt.spec_path), nullptr, false);
      if (j.is_discarded() || !j.is_object())
        throw Error(ErrorCode::SpecError, "invalid JSON in " + opt.spec_path);
    }
    for (const auto& [key, value] : opt.overrides) {
      const bool is_list = std::find_if(std::begin(kListKeys), std::end(kListKeys),
                                        [&](const char* k) { return key == k; }) != std::end(kListKeys);
      j[key] = is_list ? list_value(value) : scalar_value(value);
      if (key == "scene_path") j[key] = value;
    }
    if (!opt.channel.empty()) j["channel"] = opt.channel;
    if (opt.seed) j["seed"] = *opt.seed;
    if (opt.noiseless) j["noiseless"] = true;
    if (!opt.out.empty()) j["out"] = opt.out;
    spec = parse_spec(j.dump());
    // A scene path from the spec file is relative to that file; one from the command line to the cwd.
    if (spec.scene_path && spec.scene_path->is_relative() && !opt.overrides.contains("scene_path") &&
        !opt.spec_path.empty())
      spec.scene_path = fs::path(opt.spec_path).parent_path() / *spec.scene_path;
    spec.validate();
  } catch (const Error& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return kExitSpecError;
  }

  ExperimentReport report;
  try {
    report = run_experiment(spec);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::SpecError ? kExitSpecError : kExitCellError;
  }

  if (!opt.quiet) {
    const Index total = static_cast<Index>(report.cells.size());
    std::printf("cells: %lld ok, %lld failed\n", static_cast<long long>(total - report.failed_cells),
                static_cast<long long>(report.failed_cells));
    for (const GroupSummary& g : report.summary.groups) {
      std::printf("R=%lld %s: %lld pairs, win rate %.3f, mean dPSNR %.4f dB, mean dSSIM %.4f\n",
                  static_cast<long long>(g.resolution), std::string(to_string(g.solver)).c_str(),
                  static_cast<long long>(g.stats.pairs), g.stats.win_rate, g.stats.mean_delta_psnr,
                  g.stats.mean_delta_ssim);
    }
    std::printf("outputs in %s\n", spec.out.string().c_str());
  }
  return report.failed_cells > 0 ? kExitCellError : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underwater ghost-imaging simulator with compressive-sensing recovery"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment sweep");
  run_cmd->add_option("--spec", run.spec_path, "Experiment spec (JSON)")->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--seed", run.seed, "Master seed");
  run_cmd->add_flag("--noiseless", run.noiseless, "Use expected counts instead of Poisson draws");
  run_cmd->add_option("--channel", run.channel, "Channel preset (shallow, deep)");
  run_cmd->add_flag("--quiet", run.quiet, "Do not print the summary");
  std::map<std::string, std::string> override_values;
  for (const char* key : kScalarKeys) run_cmd->add_option(std::string("--") + key, override_values[key]);
  for (const char* key : kListKeys)
    run_cmd->add_option(std::string("--") + key, override_values[key], "Comma-separated list");

  std::string truth_path, recon_path;
  auto* metrics_cmd = app.add_subcommand("metrics", "Compare two PGM images");
  metrics_cmd->add_option("--truth", truth_path)->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--recon", recon_path)->required()->check(CLI::ExistingFile);

  std::string kind_name = "bernoulli01", patterns_out;
  Index m = 0, r = 0;
  std::uint64_t pattern_seed = 0;
  auto* gen_cmd = app.add_subcommand("gen-patterns", "Write a DMD pattern set");
  gen_cmd->add_option("--kind", kind_name, "bernoulli01, bernoulli_pm1 or gaussian");
  gen_cmd->add_option("--m", m, "Number of patterns")->required();
  gen_cmd->add_option("--r", r, "Resolution")->required();
  gen_cmd->add_option("--seed", pattern_seed);
  gen_cmd->add_option("--out", patterns_out)->required();

  std::string synth_kind = "card", synth_out;
  Index synth_r = 80, synth_k = 4;
  std::uint64_t synth_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic scene as PGM");
  synth_cmd->add_option("--kind", synth_kind, "sparse_dct, card or disk");
  synth_cmd->add_option("--r", synth_r);
  synth_cmd->add_option("--k", synth_k, "DCT sparsity for sparse_dct");
  synth_cmd->add_option("--seed", synth_seed);
  synth_cmd->add_option("--out", synth_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitSpecError;
  }

  try {
    if (*run_cmd) {
      for (auto& [key, value] : override_values)
        if (run_cmd->count(std::string("--") + key) > 0) run.overrides[key] = value;
      return run_command(run);
    }
    if (*metrics_cmd) {
      const SceneImage truth = load_pgm(truth_path);
      const SceneImage recon = load_pgm(recon_path);
      const QualityReport q = score(truth.pixels(), recon.pixels(), CellLabel{});
      std::printf("mse=%.9g\npsnr=%.9g\nssim=%.9g\n", q.mse, q.psnr, q.ssim);
      return 0;
    }
    if (*gen_cmd) {
      write_patterns(generate_patterns(parse_pattern_kind(kind_name), m, r, pattern_seed), patterns_out);
      return 0;
    }
    if (*synth_cmd) {
      save_pgm(make_synthetic(parse_synthetic_kind(synth_kind), synth_r, synth_k, synth_seed), synth_out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCellError;
  }
  return 0;
}
