#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "aquaghost/types.hpp"

namespace aquaghost {

/// Ground-truth reflectance image with pixels in [0, 1].
class SceneImage {
 public:
  SceneImage() = default;
  /// Throws InvalidArgument on empty shape or any pixel outside [0, 1] (or NaN).
  explicit SceneImage(GridXd pixels);
  SceneImage(Index width, Index height, double fill = 0.0);

  Index width() const { return pixels_.cols(); }
  Index height() const { return pixels_.rows(); }
  Index size() const { return pixels_.size(); }
  double operator()(Index row, Index col) const { return pixels_(row, col); }
  const GridXd& pixels() const { return pixels_; }
  Eigen::Map<const VectorXd> flat() const { return flatten(pixels_); }

  friend bool operator==(const SceneImage& a, const SceneImage& b) {
    return a.pixels_.rows() == b.pixels_.rows() && a.pixels_.cols() == b.pixels_.cols() &&
           a.pixels_ == b.pixels_;
  }

 private:
  GridXd pixels_;
};

/// Reads a P2 or P5 Netpbm graymap; samples are divided by maxval.
SceneImage load_pgm(const std::filesystem::path& path);

/// Writes binary P5 with round-half-up quantization. maxval must be 255 or 65535.
void save_pgm(const SceneImage& image, const std::filesystem::path& path, int maxval = 255);

enum class SyntheticKind { sparse_dct, card, disk };

SyntheticKind parse_synthetic_kind(std::string_view name);
std::string_view to_string(SyntheticKind kind);

/// Test-scene generator.
///
/// `sparse_dct`: DC coefficient fixed at 0.5 * R (mean level 0.5) plus K - 1 further
/// coefficients at distinct random positions with random sign and magnitude. If the
/// inverse transform leaves [0, 1], the draw is repeated from a seed derived from
/// (seed, attempt), at most 100 times.
///
/// `card`: fish-shaped binary silhouette defined in normalized coordinates, so it
/// rasterizes consistently at any resolution. `disk`: centred disk of radius R / 4.
/// `sparsity` is ignored for the binary kinds.
SceneImage make_synthetic(SyntheticKind kind, Index resolution, Index sparsity, std::uint64_t seed);

/// Nearest-neighbour resampling to R x R: out(i, j) = in(floor(i h / R), floor(j w / R)).
SceneImage resample_nearest(const SceneImage& image, Index resolution);

/// Number of DCT coefficients with magnitude above `tol`.
Index count_dct_nonzeros(const SceneImage& image, double tol = 1e-9);

}  // namespace aquaghost
