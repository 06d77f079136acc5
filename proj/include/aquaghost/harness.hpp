#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aquaghost/acquisition.hpp"
#include "aquaghost/dmd.hpp"
#include "aquaghost/optics.hpp"
#include "aquaghost/quality.hpp"
#include "aquaghost/recovery.hpp"
#include "aquaghost/scene.hpp"

namespace aquaghost {

enum class Postprocess { none, median3 };

Postprocess parse_postprocess(std::string_view name);
std::string_view to_string(Postprocess p);

/// One sweep over {source} x {resolution} x {solver} x {seed}. See README for the
/// JSON schema; every field below has a JSON key of the same name.
struct ExperimentSpec {
  // Scene: a PGM file (resampled to each resolution) or a synthetic kind.
  std::optional<std::filesystem::path> scene_path;
  SyntheticKind scene_kind = SyntheticKind::card;
  Index scene_sparsity = 4;
  std::optional<std::uint64_t> scene_seed;  // defaults to a stream of `seed`

  WaterChannel channel = preset("shallow");
  std::vector<SourceKind> sources{SourceKind::quantum, SourceKind::classical};
  double photon_pair_rate = 1e6;
  double detector_efficiency = 0.1;
  double coincidence_window = 1e-9;
  double gating_suppression = 0.02;  // quantum only

  PatternKind pattern_kind = PatternKind::bernoulli01;
  double m_ratio = 0.30;
  std::vector<Index> resolutions{80, 180};

  std::vector<SolverKind> solvers{SolverKind::omp};
  Transform transform = Transform::dct2;
  Index sparsity_k = 10;
  std::optional<double> sparsity_ratio;  // overrides sparsity_k: k = round(ratio * M)
  Index greedy_max_iterations = 10000;
  double greedy_residual_tol = 1e-6;
  double lambda_reg = 0.05;
  bool lambda_relative = true;
  Index ista_max_iterations = 100;
  double ista_residual_tol = 1e-6;

  double exposure_per_pattern = 0.01;
  bool subtract_accidentals = true;
  bool noiseless = false;

  Postprocess postprocess = Postprocess::median3;

  std::uint64_t seed = 7;  // master seed
  Index seeds = 10;        // seed pairs per (resolution, solver)

  std::filesystem::path out = "aquaghost-out";
  bool export_conditioning = true;
  bool write_measurements = false;
  /// Writes measured wall_ms into results.csv (otherwise 0, keeping it byte-stable).
  bool record_timings = false;

  /// Throws SpecError on violated invariants (m_ratio * N >= 1, nonempty lists, ...).
  void validate() const;

  SourceModel source_model(SourceKind kind) const;
  Index num_patterns(Index resolution) const;
  RecoveryConfig recovery_config(SolverKind solver, Index num_patterns) const;
};

/// Parses JSON text; unknown keys and type errors throw SpecError.
ExperimentSpec parse_spec(std::string_view json_text);
ExperimentSpec load_spec(const std::filesystem::path& path);
/// Canonical JSON for the spec (without the output directory).
std::string spec_to_json(const ExperimentSpec& spec);

/// RNG seeds of one (resolution, seed index) slot: shared by every source and
/// solver there, independent of every other slot.
struct SlotSeeds {
  std::uint64_t patterns = 0;
  std::uint64_t noise = 0;
};

SlotSeeds slot_seeds(std::uint64_t master, Index resolution, Index seed_index);

/// Ground-truth scene at `resolution`.
SceneImage scene_at(const ExperimentSpec& spec, Index resolution);

struct CellResult {
  CellLabel label;
  bool ok = false;
  QualityReport report;
  Index iterations = 0;
  double residual = 0.0;
  double wall_ms = 0.0;
  std::string error_kind;
  std::string error_message;
};

struct ExperimentReport {
  std::vector<CellResult> cells;  // enumeration order
  ComparisonSummary summary;
  Index failed_cells = 0;
};

/// Cell enumeration order: resolution, seed index, source, solver.
std::vector<CellLabel> enumerate_cells(const ExperimentSpec& spec);

/// Runs every cell and writes results.csv, summary.csv, groups.csv, errors.csv,
/// spec.json, cells/<id>.pgm and cells/<id>.trace.csv, conditioning/ and run.meta
/// (the only file carrying timestamps) under spec.out.
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// Parameters recorded next to an exported conditioning image.
struct ConditioningInfo {
  CellLabel label;
  std::string channel_preset;
  PatternKind pattern_kind = PatternKind::bernoulli01;
  Index num_patterns = 0;
};

/// Writes the clipped reconstruction to `pgm_path` and `key=value` lines to the
/// sidecar `<pgm_path without extension>.txt`.
void export_conditioning(const Reconstruction& reconstruction, const ConditioningInfo& info,
                         const std::filesystem::path& pgm_path);

}  // namespace aquaghost
