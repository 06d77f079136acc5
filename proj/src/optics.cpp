#include "aquaghost/optics.hpp"

#include <cmath>

#include "aquaghost/errors.hpp"

namespace aquaghost {

namespace {
bool nonneg(double v) { return std::isfinite(v) && v >= 0.0; }
}  // namespace

void WaterChannel::validate() const {
  require(nonneg(attenuation_coeff), ErrorCode::InvalidArgument, "attenuation_coeff must be >= 0");
  require(nonneg(path_length), ErrorCode::InvalidArgument, "path_length must be >= 0");
  require(nonneg(background_rate), ErrorCode::InvalidArgument, "background_rate must be >= 0");
  require(nonneg(stray_scaling_exponent), ErrorCode::InvalidArgument,
          "stray_scaling_exponent must be >= 0");
  require(transmittance(*this) > 0.0, ErrorCode::InvalidArgument, "channel transmittance underflows to 0");
}

SourceKind parse_source_kind(std::string_view name) {
  if (name == "quantum") return SourceKind::quantum;
  if (name == "classical") return SourceKind::classical;
  throw Error(ErrorCode::InvalidArgument, "unknown source kind '" + std::string(name) + "'");
}

std::string_view to_string(SourceKind kind) {
  return kind == SourceKind::quantum ? "quantum" : "classical";
}

void SourceModel::validate() const {
  require(std::isfinite(photon_pair_rate) && photon_pair_rate > 0.0, ErrorCode::InvalidArgument,
          "photon_pair_rate must be > 0");
  require(detector_efficiency > 0.0 && detector_efficiency <= 1.0, ErrorCode::InvalidArgument,
          "detector_efficiency must lie in (0, 1]");
  require(std::isfinite(coincidence_window) && coincidence_window > 0.0, ErrorCode::InvalidArgument,
          "coincidence_window must be > 0");
  require(gating_suppression >= 0.0 && gating_suppression <= 1.0, ErrorCode::InvalidArgument,
          "gating_suppression must lie in [0, 1]");
  if (kind == SourceKind::quantum) {
    require(gating_suppression < 1.0, ErrorCode::InvalidArgument,
            "quantum source needs gating_suppression < 1");
  } else {
    require(gating_suppression == 1.0, ErrorCode::InvalidArgument,
            "classical source has no coincidence gating (gating_suppression = 1)");
  }
}

SourceModel SourceModel::quantum(double gating_suppression) {
  SourceModel s;
  s.kind = SourceKind::quantum;
  s.gating_suppression = gating_suppression;
  return s;
}

SourceModel SourceModel::classical() {
  SourceModel s;
  s.kind = SourceKind::classical;
  s.gating_suppression = 1.0;
  return s;
}

double transmittance(const WaterChannel& channel) {
  return std::exp(-channel.attenuation_coeff * channel.path_length);
}

double effective_background(const WaterChannel& channel, const SourceModel& source, Index resolution) {
  require(resolution >= 1, ErrorCode::InvalidArgument, "resolution must be >= 1");
  const double ratio = static_cast<double>(resolution) / static_cast<double>(kReferenceResolution);
  return source.gating_suppression * channel.background_rate *
         std::pow(ratio, channel.stray_scaling_exponent);
}

double signal_scale(const WaterChannel& channel, const SourceModel& source) {
  return source.photon_pair_rate * source.detector_efficiency * source.detector_efficiency *
         transmittance(channel);
}

WaterChannel preset(std::string_view name) {
  // Invented defaults: shallow = short turbid path under bright ambient light,
  // deep = longer clear path, dim ambient.
  if (name == "shallow") return {0.15, 0.5, 8000.0, 1.0, "shallow"};
  if (name == "deep") return {0.05, 2.0, 1500.0, 1.0, "deep"};
  throw Error(ErrorCode::UnknownPreset, "unknown water preset '" + std::string(name) + "'");
}

}  // namespace aquaghost
