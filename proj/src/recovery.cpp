#include "aquaghost/recovery.hpp"

#include <cstdio>
#include <fstream>

namespace aquaghost {

Transform parse_transform(std::string_view name) {
  if (name == "identity") return Transform::identity;
  if (name == "dct2") return Transform::dct2;
  throw Error(ErrorCode::InvalidArgument, "unknown transform '" + std::string(name) + "'");
}

std::string_view to_string(Transform transform) {
  return transform == Transform::identity ? "identity" : "dct2";
}

SolverKind parse_solver(std::string_view name) {
  if (name == "mp") return SolverKind::mp;
  if (name == "omp") return SolverKind::omp;
  if (name == "bp_ista" || name == "ista") return SolverKind::bp_ista;
  throw Error(ErrorCode::InvalidArgument, "unknown solver '" + std::string(name) + "'");
}

std::string_view to_string(SolverKind solver) {
  switch (solver) {
    case SolverKind::mp: return "mp";
    case SolverKind::omp: return "omp";
    case SolverKind::bp_ista: return "bp_ista";
  }
  return "?";
}

void RecoveryConfig::validate(Index n) const {
  require(max_iterations >= 0, ErrorCode::InvalidArgument, "max_iterations must be >= 0");
  require(residual_tol >= 0.0, ErrorCode::InvalidArgument, "residual_tol must be >= 0");
  if (solver == SolverKind::bp_ista) {
    require(std::isfinite(lambda_reg) && lambda_reg > 0.0, ErrorCode::InvalidArgument, "lambda_reg must be > 0");
  } else {
    require(sparsity_k >= 1 && sparsity_k <= n, ErrorCode::InvalidArgument,
            "sparsity_k must lie in [1, N = " + std::to_string(n) + "]");
  }
}

double measurement_scale(const MeasurementVector& measurements) {
  const double n = static_cast<double>(measurements.patterns.resolution * measurements.patterns.resolution);
  return measurements.config.exposure_per_pattern * signal_scale(measurements.channel, measurements.source) / n;
}

Reconstruction reconstruct(const MeasurementVector& measurements, const PatternSet& patterns,
                           const RecoveryConfig& config) {
  if (measurements.size() != patterns.num_patterns()) {
    throw Error(ErrorCode::MismatchedM, std::to_string(measurements.size()) + " measurements for " +
                                            std::to_string(patterns.num_patterns()) + " patterns");
  }
  return reconstruct(measurements, make_dictionary(patterns, config.transform), config);
}

Reconstruction reconstruct(const MeasurementVector& measurements, const PatternDictionary& dictionary,
                           const RecoveryConfig& config) {
  if (measurements.size() != dictionary.rows()) {
    throw Error(ErrorCode::MismatchedM, std::to_string(measurements.size()) + " measurements for " +
                                            std::to_string(dictionary.rows()) + " patterns");
  }
  const Index r = measurements.patterns.resolution;
  require(dictionary.cols() == r * r, ErrorCode::ShapeError, "dictionary width != R^2");
  require(dictionary.transform() == config.transform, ErrorCode::InvalidArgument,
          "dictionary transform differs from the recovery config");

  const double scale = measurement_scale(measurements);
  require(scale > 0.0 && std::isfinite(scale), ErrorCode::InvalidArgument, "measurement scale must be > 0");
  const VectorXd y = measurements.y / scale;

  SparseSolution<double> sol = solve(y, dictionary, config);
  Reconstruction out;
  out.solver = config.solver;
  out.image = as_grid(dictionary.synthesize(sol.coefficients), r, r);
  out.image_clipped = out.image.cwiseMax(0.0).cwiseMin(1.0);
  out.coefficients = std::move(sol.coefficients);
  out.support = std::move(sol.support);
  out.iterations = sol.iterations;
  out.residual_norm = sol.residual_norm;
  out.objective_trace = std::move(sol.trace);
  return out;
}

void write_trace_csv(const Reconstruction& reconstruction, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << "iteration,objective_or_residual\n";
  char line[64];
  for (std::size_t i = 0; i < reconstruction.objective_trace.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.9g\n", i, reconstruction.objective_trace[i]);
    f << line;
  }
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace aquaghost
