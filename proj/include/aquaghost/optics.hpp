#pragma once

#include <string>
#include <string_view>

#include "aquaghost/types.hpp"

namespace aquaghost {

/// Stray-photon background is specified at this reference resolution.
inline constexpr Index kReferenceResolution = 80;

/// Lumped water channel: Beer-Lambert loss plus an uncorrelated background rate.
struct WaterChannel {
  double attenuation_coeff = 0.0;      // 1/m, absorption + scattering loss
  double path_length = 0.0;            // m
  double background_rate = 0.0;        // coincidence counts/s at R = 80
  double stray_scaling_exponent = 1.0;
  std::string preset_name = "custom";

  /// Throws InvalidArgument if any field is negative or non-finite.
  void validate() const;
};

enum class SourceKind { quantum, classical };

SourceKind parse_source_kind(std::string_view name);
std::string_view to_string(SourceKind kind);

struct SourceModel {
  SourceKind kind = SourceKind::quantum;
  double photon_pair_rate = 1e6;   // pairs/s
  double detector_efficiency = 0.1;
  double coincidence_window = 1e-9;  // s; folded into gating_suppression
  double gating_suppression = 0.02;

  void validate() const;

  /// Coincidence-gated entangled source with the given suppression.
  static SourceModel quantum(double gating_suppression = 0.02);
  /// Classical illumination: identical optics, no background rejection.
  static SourceModel classical();
};

/// exp(-c z), in (0, 1].
double transmittance(const WaterChannel& channel);

/// gating_suppression * background_rate * (R / 80)^exponent.
double effective_background(const WaterChannel& channel, const SourceModel& source, Index resolution);

/// Coincidence signal rate for a fully open pattern on a unit scene:
/// photon_pair_rate * efficiency^2 * transmittance.
double signal_scale(const WaterChannel& channel, const SourceModel& source);

/// "shallow" or "deep"; anything else throws UnknownPreset.
WaterChannel preset(std::string_view name);

}  // namespace aquaghost
