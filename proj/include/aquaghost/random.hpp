#pragma once

#include <cstdint>

namespace aquaghost {

/// SplitMix64 finalizer (Steele, Lea & Flood constants).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Purpose tags mixed into a master seed to obtain independent streams.
enum class StreamTag : std::uint64_t {
  patterns = 0x5041545445524e53ULL,  // "PATTERNS"
  noise = 0x4e4f495345000000ULL,     // "NOISE"
  scene = 0x5343454e45000000ULL,     // "SCENE"
};

/// derive_seed(master, tag) = mix64(master XOR mix64(tag + golden_gamma)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  return mix64(master ^ mix64(tag + 0x9e3779b97f4a7c15ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, StreamTag tag) {
  return derive_seed(master, static_cast<std::uint64_t>(tag));
}

/// SplitMix64 sequence: the state advances by the golden gamma and each output is
/// mix64 of the state. Conversions to floating point are done here rather than
/// through <random> distributions, whose output is implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_positive() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::uint64_t state_;
};

}  // namespace aquaghost
