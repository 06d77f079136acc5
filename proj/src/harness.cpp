#include "aquaghost/harness.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include <json.hpp>

#include "aquaghost/random.hpp"

namespace aquaghost {

using nlohmann::json;

Postprocess parse_postprocess(std::string_view name) {
  if (name == "none") return Postprocess::none;
  if (name == "median3") return Postprocess::median3;
  throw Error(ErrorCode::SpecError, "unknown postprocess '" + std::string(name) + "'");
}

std::string_view to_string(Postprocess p) { return p == Postprocess::none ? "none" : "median3"; }

// ---------------------------------------------------------------------------------------------
// Spec

void ExperimentSpec::validate() const {
  const auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw Error(ErrorCode::SpecError, msg);
  };
  check(!sources.empty(), "sources must not be empty");
  check(!resolutions.empty(), "resolutions must not be empty");
  check(!solvers.empty(), "solvers must not be empty");
  check(seeds >= 1, "seeds must be >= 1");
  check(m_ratio > 0.0 && m_ratio <= 1.0, "m_ratio must lie in (0, 1]");
  check(std::set<SourceKind>(sources.begin(), sources.end()).size() == sources.size(), "duplicate source");
  check(std::set<SolverKind>(solvers.begin(), solvers.end()).size() == solvers.size(), "duplicate solver");
  check(std::set<Index>(resolutions.begin(), resolutions.end()).size() == resolutions.size(),
        "duplicate resolution");
  for (Index r : resolutions) {
    check(r >= 2, "resolutions must be >= 2");
    check(num_patterns(r) >= 1, "m_ratio * N < 1 at R = " + std::to_string(r));
  }
  check(!sparsity_ratio || (*sparsity_ratio > 0.0 && *sparsity_ratio <= 1.0), "sparsity_ratio must lie in (0, 1]");
  check(exposure_per_pattern > 0.0, "exposure_per_pattern must be > 0");
  try {
    channel.validate();
    for (SourceKind k : sources) source_model(k).validate();
    AcquisitionConfig{exposure_per_pattern, 0, subtract_accidentals, noiseless}.validate();
    for (SolverKind s : solvers)
      for (Index r : resolutions) recovery_config(s, num_patterns(r)).validate(r * r);
  } catch (const Error& e) {
    throw Error(ErrorCode::SpecError, e.what());
  }
}

SourceModel ExperimentSpec::source_model(SourceKind kind) const {
  SourceModel s = kind == SourceKind::quantum ? SourceModel::quantum(gating_suppression) : SourceModel::classical();
  s.photon_pair_rate = photon_pair_rate;
  s.detector_efficiency = detector_efficiency;
  s.coincidence_window = coincidence_window;
  return s;
}

Index ExperimentSpec::num_patterns(Index resolution) const {
  return static_cast<Index>(std::llround(m_ratio * static_cast<double>(resolution * resolution)));
}

RecoveryConfig ExperimentSpec::recovery_config(SolverKind solver, Index m) const {
  RecoveryConfig c;
  c.solver = solver;
  c.transform = transform;
  if (solver == SolverKind::bp_ista) {
    c.lambda_reg = lambda_reg;
    c.lambda_relative = lambda_relative;
    c.max_iterations = ista_max_iterations;
    c.residual_tol = ista_residual_tol;
  } else {
    c.sparsity_k = sparsity_ratio ? std::max<Index>(1, std::llround(*sparsity_ratio * static_cast<double>(m)))
                                  : sparsity_k;
    c.max_iterations = greedy_max_iterations;
    c.residual_tol = greedy_residual_tol;
  }
  return c;
}

namespace {

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SpecError, std::string("bad value for '") + key + "': " + e.what());
  }
}

WaterChannel parse_channel(const json& j) {
  if (j.is_string()) {
    try {
      return preset(j.get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorCode::SpecError, e.what());
    }
  }
  if (!j.is_object()) throw Error(ErrorCode::SpecError, "channel must be a preset name or an object");
  WaterChannel c;
  if (j.contains("preset")) c = parse_channel(j.at("preset"));
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    if (key == "attenuation_coeff") c.attenuation_coeff = get_as<double>(value, "attenuation_coeff");
    else if (key == "path_length") c.path_length = get_as<double>(value, "path_length");
    else if (key == "background_rate") c.background_rate = get_as<double>(value, "background_rate");
    else if (key == "stray_scaling_exponent") c.stray_scaling_exponent = get_as<double>(value, "stray_scaling_exponent");
    else if (key == "preset_name") c.preset_name = get_as<std::string>(value, "preset_name");
    else throw Error(ErrorCode::SpecError, "unknown channel key '" + key + "'");
  }
  return c;
}

json channel_to_json(const WaterChannel& c) {
  return {{"attenuation_coeff", c.attenuation_coeff},
          {"path_length", c.path_length},
          {"background_rate", c.background_rate},
          {"stray_scaling_exponent", c.stray_scaling_exponent},
          {"preset_name", c.preset_name}};
}

template <typename T, typename Parse>
std::vector<T> parse_list(const json& j, const char* key, Parse parse) {
  if (!j.is_array()) throw Error(ErrorCode::SpecError, std::string("'") + key + "' must be an array");
  std::vector<T> out;
  for (const auto& v : j) out.push_back(parse(v));
  return out;
}

// Library parse errors inside a spec are spec errors.
template <typename F>
auto as_spec_error(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::SpecError, e.what());
  }
}

}  // namespace

ExperimentSpec parse_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SpecError, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::SpecError, "spec must be a JSON object");

  ExperimentSpec s;
  for (const auto& [key, v] : j.items()) {
    const char* k = key.c_str();
    if (key == "scene_path") s.scene_path = get_as<std::string>(v, k);
    else if (key == "scene_kind") s.scene_kind = as_spec_error([&] { return parse_synthetic_kind(get_as<std::string>(v, k)); });
    else if (key == "scene_sparsity") s.scene_sparsity = get_as<Index>(v, k);
    else if (key == "scene_seed") s.scene_seed = get_as<std::uint64_t>(v, k);
    else if (key == "channel") s.channel = parse_channel(v);
    else if (key == "sources")
      s.sources = parse_list<SourceKind>(v, k, [&](const json& e) {
        return as_spec_error([&] { return parse_source_kind(get_as<std::string>(e, k)); });
      });
    else if (key == "photon_pair_rate") s.photon_pair_rate = get_as<double>(v, k);
    else if (key == "detector_efficiency") s.detector_efficiency = get_as<double>(v, k);
    else if (key == "coincidence_window") s.coincidence_window = get_as<double>(v, k);
    else if (key == "gating_suppression") s.gating_suppression = get_as<double>(v, k);
    else if (key == "pattern_kind") s.pattern_kind = as_spec_error([&] { return parse_pattern_kind(get_as<std::string>(v, k)); });
    else if (key == "m_ratio") s.m_ratio = get_as<double>(v, k);
    else if (key == "resolutions") s.resolutions = parse_list<Index>(v, k, [&](const json& e) { return get_as<Index>(e, k); });
    else if (key == "solvers")
      s.solvers = parse_list<SolverKind>(v, k, [&](const json& e) {
        return as_spec_error([&] { return parse_solver(get_as<std::string>(e, k)); });
      });
    else if (key == "transform") s.transform = as_spec_error([&] { return parse_transform(get_as<std::string>(v, k)); });
    else if (key == "sparsity_k") s.sparsity_k = get_as<Index>(v, k);
    else if (key == "sparsity_ratio") s.sparsity_ratio = get_as<double>(v, k);
    else if (key == "greedy_max_iterations") s.greedy_max_iterations = get_as<Index>(v, k);
    else if (key == "greedy_residual_tol") s.greedy_residual_tol = get_as<double>(v, k);
    else if (key == "lambda_reg") s.lambda_reg = get_as<double>(v, k);
    else if (key == "lambda_relative") s.lambda_relative = get_as<bool>(v, k);
    else if (key == "ista_max_iterations") s.ista_max_iterations = get_as<Index>(v, k);
    else if (key == "ista_residual_tol") s.ista_residual_tol = get_as<double>(v, k);
    else if (key == "exposure_per_pattern") s.exposure_per_pattern = get_as<double>(v, k);
    else if (key == "subtract_accidentals") s.subtract_accidentals = get_as<bool>(v, k);
    else if (key == "noiseless") s.noiseless = get_as<bool>(v, k);
    else if (key == "postprocess") s.postprocess = parse_postprocess(get_as<std::string>(v, k));
    else if (key == "seed") s.seed = get_as<std::uint64_t>(v, k);
    else if (key == "seeds") s.seeds = get_as<Index>(v, k);
    else if (key == "out") s.out = get_as<std::string>(v, k);
    else if (key == "export_conditioning") s.export_conditioning = get_as<bool>(v, k);
    else if (key == "write_measurements") s.write_measurements = get_as<bool>(v, k);
    else if (key == "record_timings") s.record_timings = get_as<bool>(v, k);
    else throw Error(ErrorCode::SpecError, "unknown spec key '" + key + "'");
  }
  return s;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::SpecError, "cannot open spec " + path.string());
  ExperimentSpec s = parse_spec(std::string(std::istreambuf_iterator<char>(f), {}));
  // Relative scene paths resolve against the spec file's directory.
  if (s.scene_path && s.scene_path->is_relative()) s.scene_path = path.parent_path() / *s.scene_path;
  return s;
}

std::string spec_to_json(const ExperimentSpec& s) {
  json j;
  if (s.scene_path) j["scene_path"] = s.scene_path->generic_string();
  j["scene_kind"] = to_string(s.scene_kind);
  j["scene_sparsity"] = s.scene_sparsity;
  if (s.scene_seed) j["scene_seed"] = *s.scene_seed;
  j["channel"] = channel_to_json(s.channel);
  j["sources"] = json::array();
  for (auto k : s.sources) j["sources"].push_back(to_string(k));
  j["photon_pair_rate"] = s.photon_pair_rate;
  j["detector_efficiency"] = s.detector_efficiency;
  j["coincidence_window"] = s.coincidence_window;
  j["gating_suppression"] = s.gating_suppression;
  j["pattern_kind"] = to_string(s.pattern_kind);
  j["m_ratio"] = s.m_ratio;
  j["resolutions"] = s.resolutions;
  j["solvers"] = json::array();
  for (auto k : s.solvers) j["solvers"].push_back(to_string(k));
  j["transform"] = to_string(s.transform);
  j["sparsity_k"] = s.sparsity_k;
  if (s.sparsity_ratio) j["sparsity_ratio"] = *s.sparsity_ratio;
  j["greedy_max_iterations"] = s.greedy_max_iterations;
  j["greedy_residual_tol"] = s.greedy_residual_tol;
  j["lambda_reg"] = s.lambda_reg;
  j["lambda_relative"] = s.lambda_relative;
  j["ista_max_iterations"] = s.ista_max_iterations;
  j["ista_residual_tol"] = s.ista_residual_tol;
  j["exposure_per_pattern"] = s.exposure_per_pattern;
  j["subtract_accidentals"] = s.subtract_accidentals;
  j["noiseless"] = s.noiseless;
  j["postprocess"] = to_string(s.postprocess);
  j["seed"] = s.seed;
  j["seeds"] = s.seeds;
  j["export_conditioning"] = s.export_conditioning;
  j["write_measurements"] = s.write_measurements;
  j["record_timings"] = s.record_timings;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------------------------
// Sweep

SlotSeeds slot_seeds(std::uint64_t master, Index resolution, Index seed_index) {
  const auto slot = [&](StreamTag tag) {
    return derive_seed(derive_seed(derive_seed(master, tag), static_cast<std::uint64_t>(resolution)),
                       static_cast<std::uint64_t>(seed_index));
  };
  return {slot(StreamTag::patterns), slot(StreamTag::noise)};
}

SceneImage scene_at(const ExperimentSpec& spec, Index resolution) {
  if (spec.scene_path) return resample_nearest(load_pgm(*spec.scene_path), resolution);
  const std::uint64_t seed = spec.scene_seed ? *spec.scene_seed : derive_seed(spec.seed, StreamTag::scene);
  return make_synthetic(spec.scene_kind, resolution, spec.scene_sparsity, seed);
}

std::vector<CellLabel> enumerate_cells(const ExperimentSpec& spec) {
  std::vector<CellLabel> cells;
  for (Index r : spec.resolutions)
    for (Index s = 0; s < spec.seeds; ++s)
      for (SourceKind src : spec.sources)
        for (SolverKind solver : spec.solvers) cells.push_back({src, r, solver, static_cast<std::uint64_t>(s)});
  return cells;
}

namespace {

namespace fs = std::filesystem;

std::string fmt9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Write to a sibling temp file, then rename into place.
void write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <typename Writer>
void write_via_temp(const fs::path& path, Writer&& writer) {
  const fs::path tmp = path.string() + ".tmp";
  writer(tmp);
  fs::rename(tmp, path);
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string conditioning_sidecar(const ConditioningInfo& info) {
  std::string s;
  s += "cell_id=" + info.label.id() + "\n";
  s += "source=" + std::string(to_string(info.label.source)) + "\n";
  s += "resolution=" + std::to_string(info.label.resolution) + "\n";
  s += "solver=" + std::string(to_string(info.label.solver)) + "\n";
  s += "seed=" + std::to_string(info.label.seed) + "\n";
  s += "channel=" + info.channel_preset + "\n";
  s += "pattern_kind=" + std::string(to_string(info.pattern_kind)) + "\n";
  s += "num_patterns=" + std::to_string(info.num_patterns) + "\n";
  return s;
}

}  // namespace

void export_conditioning(const Reconstruction& reconstruction, const ConditioningInfo& info,
                         const std::filesystem::path& pgm_path) {
  write_via_temp(pgm_path, [&](const fs::path& p) { save_pgm(reconstruction.clipped_scene(), p, 255); });
  fs::path sidecar = pgm_path;
  sidecar.replace_extension(".txt");
  write_file(sidecar, conditioning_sidecar(info));
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto run_start = std::chrono::steady_clock::now();
  const std::string started = iso_now();

  const fs::path out = spec.out;
  std::error_code ec;
  fs::create_directories(out / "cells", ec);
  if (spec.export_conditioning) fs::create_directories(out / "conditioning", ec);
  fs::create_directories(out / "truth", ec);
  if (spec.write_measurements) fs::create_directories(out / "measurements", ec);
  if (!fs::is_directory(out / "cells")) throw Error(ErrorCode::SpecError, "output directory not writable: " + out.string());

  ExperimentReport report;
  std::map<std::string, std::size_t> index_of;
  for (const CellLabel& label : enumerate_cells(spec)) {
    index_of[label.id()] = report.cells.size();
    CellResult cell;
    cell.label = label;
    report.cells.push_back(std::move(cell));
  }
  const auto fail = [&](const CellLabel& label, const std::string& kind, const std::string& message) {
    CellResult& cell = report.cells[index_of.at(label.id())];
    cell.ok = false;
    cell.error_kind = kind;
    cell.error_message = message;
  };

  for (Index r : spec.resolutions) {
    std::optional<SceneImage> truth;
    std::string scene_error_kind;
    std::string scene_error;
    try {
      truth = scene_at(spec, r);
      write_via_temp(out / "truth" / ("r" + std::to_string(r) + ".pgm"),
                     [&](const fs::path& p) { save_pgm(*truth, p, 255); });
    } catch (const Error& e) {
      scene_error_kind = std::string(to_string(e.code()));
      scene_error = e.what();
    }
    const Index m = spec.num_patterns(r);

    for (Index seed_index = 0; seed_index < spec.seeds; ++seed_index) {
      const auto seed_u = static_cast<std::uint64_t>(seed_index);
      const auto slot_cells = [&](auto&& f) {
        for (SourceKind src : spec.sources)
          for (SolverKind solver : spec.solvers) f(CellLabel{src, r, solver, seed_u});
      };
      if (!truth) {
        slot_cells([&](const CellLabel& l) { fail(l, scene_error_kind, scene_error); });
        continue;
      }
      const SlotSeeds seeds = slot_seeds(spec.seed, r, seed_index);

      std::optional<PatternSet> patterns;
      try {
        patterns = generate_patterns(spec.pattern_kind, m, r, seeds.patterns);
      } catch (const Error& e) {
        slot_cells([&](const CellLabel& l) { fail(l, std::string(to_string(e.code())), e.what()); });
        continue;
      }
      const PatternDictionary dictionary = make_dictionary(*patterns, spec.transform);

      for (SourceKind src : spec.sources) {
        std::optional<MeasurementVector> measurements;
        try {
          AcquisitionConfig acq{spec.exposure_per_pattern, seeds.noise, spec.subtract_accidentals, spec.noiseless};
          measurements = acquire(*truth, *patterns, spec.channel, spec.source_model(src), acq);
          if (spec.write_measurements) {
            const std::string name = std::string(to_string(src)) + "-r" + std::to_string(r) + "-s" +
                                     std::to_string(seed_index) + ".csv";
            write_via_temp(out / "measurements" / name,
                           [&](const fs::path& p) { write_measurements_csv(*measurements, p); });
          }
        } catch (const Error& e) {
          for (SolverKind solver : spec.solvers)
            fail({src, r, solver, seed_u}, std::string(to_string(e.code())), e.what());
          continue;
        }

        for (SolverKind solver : spec.solvers) {
          const CellLabel label{src, r, solver, seed_u};
          CellResult& cell = report.cells[index_of.at(label.id())];
          try {
            const auto t0 = std::chrono::steady_clock::now();
            Reconstruction recon = reconstruct(*measurements, dictionary, spec.recovery_config(solver, m));
            if (spec.postprocess == Postprocess::median3) recon.image_clipped = median_filter3(recon.image_clipped);
            cell.report = score(truth->pixels(), recon.image_clipped, label);
            cell.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            cell.iterations = recon.iterations;
            cell.residual = recon.residual_norm;

            const std::string id = label.id();
            write_via_temp(out / "cells" / (id + ".pgm"),
                           [&](const fs::path& p) { save_pgm(recon.clipped_scene(), p, 255); });
            write_via_temp(out / "cells" / (id + ".trace.csv"), [&](const fs::path& p) { write_trace_csv(recon, p); });
            if (spec.export_conditioning) {
              export_conditioning(recon, {label, spec.channel.preset_name, spec.pattern_kind, m},
                                  out / "conditioning" / (id + ".pgm"));
            }
            cell.ok = true;
          } catch (const Error& e) {
            fail(label, std::string(to_string(e.code())), e.what());
          } catch (const std::exception& e) {
            fail(label, "Exception", e.what());
          }
        }
      }
    }
  }

  // Aggregation in enumeration order.
  std::string results = "cell_id,source,resolution,solver,seed,mse,psnr,ssim,iterations,residual,wall_ms\n";
  std::string errors = "cell_id,error_kind,message\n";
  std::vector<QualityReport> ok_reports;
  std::set<std::tuple<Index, int, std::uint64_t, int>> ok_keys;
  for (const CellResult& c : report.cells) {
    if (!c.ok) {
      ++report.failed_cells;
      std::string msg = c.error_message;
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      errors += c.label.id() + "," + c.error_kind + "," + msg + "\n";
      continue;
    }
    const auto& l = c.label;
    results += l.id() + "," + std::string(to_string(l.source)) + "," + std::to_string(l.resolution) + "," +
               std::string(to_string(l.solver)) + "," + std::to_string(l.seed) + "," + fmt9(c.report.mse) + "," +
               fmt9(c.report.psnr) + "," + fmt9(c.report.ssim) + "," + std::to_string(c.iterations) + "," +
               fmt9(c.residual) + "," + (spec.record_timings ? fmt9(c.wall_ms) : std::string("0")) + "\n";
    ok_keys.insert({l.resolution, static_cast<int>(l.solver), l.seed, static_cast<int>(l.source)});
  }
  // Only complete seed pairs enter the comparison.
  for (const CellResult& c : report.cells) {
    if (!c.ok) continue;
    const auto& l = c.label;
    const int other = l.source == SourceKind::quantum ? static_cast<int>(SourceKind::classical)
                                                      : static_cast<int>(SourceKind::quantum);
    if (ok_keys.contains({l.resolution, static_cast<int>(l.solver), l.seed, other})) ok_reports.push_back(c.report);
  }
  report.summary = compare_cells(ok_reports, SourceKind::quantum);

  std::string summary =
      "pair_id,resolution,solver,seed,psnr_quantum,psnr_classical,delta_psnr,ssim_quantum,ssim_classical,delta_ssim\n";
  for (const PairDelta& p : report.summary.pairs) {
    summary += "r" + std::to_string(p.resolution) + "-" + std::string(to_string(p.solver)) + "-s" +
               std::to_string(p.seed) + "," + std::to_string(p.resolution) + "," + std::string(to_string(p.solver)) +
               "," + std::to_string(p.seed) + "," + fmt9(p.psnr_treated) + "," + fmt9(p.psnr_control) + "," +
               fmt9(p.delta_psnr()) + "," + fmt9(p.ssim_treated) + "," + fmt9(p.ssim_control) + "," +
               fmt9(p.delta_ssim()) + "\n";
  }
  std::string groups = "resolution,solver,pairs,win_rate,mean_delta_psnr,sd_delta_psnr,mean_delta_ssim,sd_delta_ssim\n";
  const auto group_row = [&](const std::string& res, const std::string& solver, const DeltaStats& s) {
    groups += res + "," + solver + "," + std::to_string(s.pairs) + "," + fmt9(s.win_rate) + "," +
              fmt9(s.mean_delta_psnr) + "," + fmt9(s.sd_delta_psnr) + "," + fmt9(s.mean_delta_ssim) + "," +
              fmt9(s.sd_delta_ssim) + "\n";
  };
  for (const GroupSummary& g : report.summary.groups)
    group_row(std::to_string(g.resolution), std::string(to_string(g.solver)), g.stats);
  group_row("all", "all", report.summary.overall);

  write_file(out / "results.csv", results);
  write_file(out / "summary.csv", summary);
  write_file(out / "groups.csv", groups);
  write_file(out / "errors.csv", errors);
  write_file(out / "spec.json", spec_to_json(spec));

  const double total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - run_start).count();
  std::string meta = "started=" + started + "\nfinished=" + iso_now() + "\nwall_ms=" + fmt9(total_ms) + "\n";
  for (const CellResult& c : report.cells) meta += "cell_wall_ms." + c.label.id() + "=" + fmt9(c.wall_ms) + "\n";
  write_file(out / "run.meta", meta);
  return report;
}

}  // namespace aquaghost
