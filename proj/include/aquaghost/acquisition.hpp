#pragma once

#include <cstdint>
#include <filesystem>

#include "aquaghost/dmd.hpp"
#include "aquaghost/optics.hpp"
#include "aquaghost/random.hpp"
#include "aquaghost/scene.hpp"

namespace aquaghost {

struct AcquisitionConfig {
  double exposure_per_pattern = 0.01;  // s
  std::uint64_t seed = 0;              // noise stream
  bool subtract_accidentals = true;
  /// Replace Poisson draws by their expectations (counts become real-valued).
  bool noiseless = false;

  void validate() const;
};

/// Identity of the pattern set a measurement was taken with.
struct PatternSetInfo {
  PatternKind kind = PatternKind::bernoulli01;
  Index num_patterns = 0;
  Index resolution = 0;
  std::uint64_t seed = 0;
};

/// Per-pattern coincidence counts and the observation vector derived from them.
struct MeasurementVector {
  VectorXd counts;       // raw coincidences; integer-valued unless config.noiseless
  VectorXd accidentals;  // expected background coincidences
  VectorXd y;            // counts - accidentals when subtraction is enabled, else counts; may be negative
  PatternSetInfo patterns;
  SourceModel source;
  WaterChannel channel;
  AcquisitionConfig config;

  Index size() const { return counts.size(); }
};

/// Coincidence rate for one pattern: S <a, x> / N + B * mean|a|, where
/// S = signal_scale(channel, source) and B = effective_background(channel, source, R).
double expected_rate(const SceneImage& scene, const VectorXd& pattern_row, const WaterChannel& channel,
                     const SourceModel& source, Index resolution);

/// Signal and background rate per pattern, computed with one matrix product.
struct RateBreakdown {
  VectorXd signal;
  VectorXd background;
  VectorXd total() const { return signal + background; }
};

RateBreakdown expected_rates(const SceneImage& scene, const PatternSet& patterns, const WaterChannel& channel,
                             const SourceModel& source);

/// Mean over patterns of background rate / signal rate (noiseless expectation).
double mean_background_to_signal(const SceneImage& scene, const PatternSet& patterns,
                                 const WaterChannel& channel, const SourceModel& source);

/// Exact Poisson variate: sequential-search inversion for lambda < 30, transformed
/// rejection with squeeze (PTRS) otherwise. Throws InvalidRate for negative or
/// non-finite lambda.
std::uint64_t poisson_draw(double lambda, RandomStream& rng);

/// Simulates one coincidence count per pattern, drawing noise sequentially in
/// pattern order from config.seed.
MeasurementVector acquire(const SceneImage& scene, const PatternSet& patterns, const WaterChannel& channel,
                          const SourceModel& source, const AcquisitionConfig& config);

/// CSV with header `pattern_index,counts,accidentals,y`, %.9g floats, LF endings.
void write_measurements_csv(const MeasurementVector& measurements, const std::filesystem::path& path);

}  // namespace aquaghost
