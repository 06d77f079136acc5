#include "aquaghost/acquisition.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "aquaghost/errors.hpp"

namespace aquaghost {

void AcquisitionConfig::validate() const {
  require(std::isfinite(exposure_per_pattern) && exposure_per_pattern > 0.0, ErrorCode::InvalidArgument,
          "exposure_per_pattern must be > 0");
}

namespace {

void check_shapes(const SceneImage& scene, Index resolution) {
  if (scene.width() != resolution || scene.height() != resolution) {
    throw Error(ErrorCode::ShapeError, "scene is " + std::to_string(scene.width()) + "x" +
                                           std::to_string(scene.height()) + " but patterns are " +
                                           std::to_string(resolution) + "x" + std::to_string(resolution));
  }
}

std::uint64_t poisson_inversion(double lambda, RandomStream& rng) {
  const double u = rng.uniform();
  double p = std::exp(-lambda);
  double cdf = p;
  std::uint64_t k = 0;
  // The cap only matters when u lands in the last ulp of the cdf.
  while (u > cdf && k < 1000) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Hormann (1993), "The transformed rejection method for generating Poisson random variables".
std::uint64_t poisson_ptrs(double lambda, RandomStream& rng) {
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  while (true) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -lambda + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

}  // namespace

double expected_rate(const SceneImage& scene, const VectorXd& pattern_row, const WaterChannel& channel,
                     const SourceModel& source, Index resolution) {
  check_shapes(scene, resolution);
  const Index n = resolution * resolution;
  require(pattern_row.size() == n, ErrorCode::ShapeError, "pattern row length != R^2");
  const double dot = pattern_row.dot(scene.flat());
  const double open = pattern_row.cwiseAbs().mean();
  return signal_scale(channel, source) * dot / static_cast<double>(n) +
         effective_background(channel, source, resolution) * open;
}

RateBreakdown expected_rates(const SceneImage& scene, const PatternSet& patterns, const WaterChannel& channel,
                             const SourceModel& source) {
  const Index r = patterns.resolution();
  check_shapes(scene, r);
  const Index m = patterns.num_patterns();
  const double n = static_cast<double>(patterns.num_pixels());
  const VectorXd ax = as_matrix(patterns).apply(scene.flat());
  const double s = signal_scale(channel, source);
  const double b = effective_background(channel, source, r);

  RateBreakdown rates;
  rates.signal = ax * (s / n);
  rates.background.resize(m);
  for (Index i = 0; i < m; ++i) rates.background[i] = b * effective_open_fraction(patterns, i);
  return rates;
}

double mean_background_to_signal(const SceneImage& scene, const PatternSet& patterns,
                                 const WaterChannel& channel, const SourceModel& source) {
  const RateBreakdown rates = expected_rates(scene, patterns, channel, source);
  return (rates.background.array() / rates.signal.array()).mean();
}

std::uint64_t poisson_draw(double lambda, RandomStream& rng) {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw Error(ErrorCode::InvalidRate, "Poisson mean must be finite and >= 0, got " + std::to_string(lambda));
  }
  if (lambda == 0.0) return 0;
  return lambda < 30.0 ? poisson_inversion(lambda, rng) : poisson_ptrs(lambda, rng);
}

MeasurementVector acquire(const SceneImage& scene, const PatternSet& patterns, const WaterChannel& channel,
                          const SourceModel& source, const AcquisitionConfig& config) {
  config.validate();
  channel.validate();
  source.validate();
  const RateBreakdown rates = expected_rates(scene, patterns, channel, source);
  const Index m = patterns.num_patterns();
  const double t = config.exposure_per_pattern;

  MeasurementVector out;
  out.counts.resize(m);
  out.accidentals = rates.background * t;
  RandomStream rng(config.seed);
  for (Index i = 0; i < m; ++i) {
    // Signed pattern kinds can have negative expected counts; the draw then uses
    // |lambda| and keeps the sign (difference of positive and negative exposures).
    const double lambda = (rates.signal[i] + rates.background[i]) * t;
    if (config.noiseless) {
      out.counts[i] = lambda;
    } else {
      const double draw = static_cast<double>(poisson_draw(std::fabs(lambda), rng));
      out.counts[i] = lambda < 0.0 ? -draw : draw;
    }
  }
  out.y = config.subtract_accidentals ? VectorXd(out.counts - out.accidentals) : out.counts;
  out.patterns = {patterns.kind(), m, patterns.resolution(), patterns.seed()};
  out.source = source;
  out.channel = channel;
  out.config = config;
  return out;
}

void write_measurements_csv(const MeasurementVector& measurements, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << "pattern_index,counts,accidentals,y\n";
  char line[128];
  for (Index i = 0; i < measurements.size(); ++i) {
    std::snprintf(line, sizeof line, "%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(i), measurements.counts[i],
                  measurements.accidentals[i], measurements.y[i]);
    f << line;
  }
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace aquaghost
