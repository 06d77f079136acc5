#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "aquaghost/errors.hpp"
#include "aquaghost/optics.hpp"
#include "aquaghost/recovery.hpp"
#include "aquaghost/types.hpp"

namespace aquaghost {

inline constexpr double kPsnrCap = 100.0;

namespace detail {
template <typename DA, typename DB>
void check_same_shape(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::ShapeError, std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                                           std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}
}  // namespace detail

template <typename DA, typename DB>
typename DA::Scalar mse(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::check_same_shape(a, b);
  return (a.derived() - b.derived()).squaredNorm() / static_cast<typename DA::Scalar>(a.size());
}

/// 10 log10(peak^2 / mse), capped at 100 dB when mse < 1e-10.
template <typename DA, typename DB>
typename DA::Scalar psnr(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                         typename DA::Scalar peak = 1) {
  using Scalar = typename DA::Scalar;
  const Scalar e = mse(a, b);
  if (e < Scalar(1e-10)) return Scalar(kPsnrCap);
  return std::min(Scalar(kPsnrCap), Scalar(10) * std::log10(peak * peak / e));
}

/// Normalized 1D Gaussian, 11 taps, sigma 1.5.
inline std::array<double, 11> ssim_kernel() {
  std::array<double, 11> g{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= sum;
  return g;
}

/// Mean SSIM over all valid (unpadded) 11x11 Gaussian windows, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Throws ImageTooSmall below 11x11.
template <typename DA, typename DB>
double ssim(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::check_same_shape(a, b);
  if (a.rows() < 11 || a.cols() < 11) {
    throw Error(ErrorCode::ImageTooSmall, "SSIM needs at least 11x11, got " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()));
  }
  const auto g = ssim_kernel();
  const GridXd ad = a.template cast<double>();
  const GridXd bd = b.template cast<double>();

  // Separable valid-mode filtering: horizontal then vertical.
  const auto filter = [&](const GridXd& x) {
    const Index h = x.rows();
    const Index w = x.cols() - 10;
    GridXd tmp(h, w);
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        double s = 0.0;
        for (Index t = 0; t < 11; ++t) s += g[static_cast<std::size_t>(t)] * x(i, j + t);
        tmp(i, j) = s;
      }
    GridXd out(h - 10, w);
    for (Index i = 0; i < h - 10; ++i)
      for (Index j = 0; j < w; ++j) {
        double s = 0.0;
        for (Index t = 0; t < 11; ++t) s += g[static_cast<std::size_t>(t)] * tmp(i + t, j);
        out(i, j) = s;
      }
    return out;
  };

  const GridXd mu_a = filter(ad);
  const GridXd mu_b = filter(bd);
  const GridXd e_aa = filter(ad.cwiseProduct(ad));
  const GridXd e_bb = filter(bd.cwiseProduct(bd));
  const GridXd e_ab = filter(ad.cwiseProduct(bd));

  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double total = 0.0;
  for (Index k = 0; k < mu_a.size(); ++k) {
    const double ma = mu_a.data()[k];
    const double mb = mu_b.data()[k];
    const double va = e_aa.data()[k] - ma * ma;
    const double vb = e_bb.data()[k] - mb * mb;
    const double cov = e_ab.data()[k] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

/// 3x3 median with edge replication.
template <typename Derived>
Grid<typename Derived::Scalar> median_filter3(const Eigen::MatrixBase<Derived>& grid) {
  using Scalar = typename Derived::Scalar;
  require(grid.size() > 0, ErrorCode::InvalidArgument, "median filter needs a nonempty grid");
  const Index h = grid.rows();
  const Index w = grid.cols();
  Grid<Scalar> out(h, w);
  std::array<Scalar, 9> window{};
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      std::size_t n = 0;
      for (Index di = -1; di <= 1; ++di)
        for (Index dj = -1; dj <= 1; ++dj)
          window[n++] = grid(std::clamp<Index>(i + di, 0, h - 1), std::clamp<Index>(j + dj, 0, w - 1));
      std::nth_element(window.begin(), window.begin() + 4, window.end());
      out(i, j) = window[4];
    }
  }
  return out;
}

/// p >= t maps to 1, everything else to 0.
template <typename Derived>
Grid<typename Derived::Scalar> threshold(const Eigen::MatrixBase<Derived>& grid, typename Derived::Scalar t) {
  using Scalar = typename Derived::Scalar;
  require(t >= Scalar(0) && t <= Scalar(1), ErrorCode::InvalidArgument, "threshold must lie in [0, 1]");
  return (grid.array() >= t).template cast<Scalar>();
}

// ---------------------------------------------------------------------------------------------
// Reports and the source comparison

/// Identifies one experiment cell.
struct CellLabel {
  SourceKind source = SourceKind::quantum;
  Index resolution = 0;
  SolverKind solver = SolverKind::omp;
  std::uint64_t seed = 0;

  /// e.g. "quantum-r80-omp-s3"
  std::string id() const;
};

struct QualityReport {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;  // NaN when the image is smaller than the SSIM window
  CellLabel label;
};

/// mse, psnr and ssim of `recon` against `truth`.
QualityReport score(const GridXd& truth, const GridXd& recon, const CellLabel& label);

/// treated - control for one seed-paired cell.
struct PairDelta {
  Index resolution = 0;
  SolverKind solver = SolverKind::omp;
  std::uint64_t seed = 0;
  double psnr_treated = 0.0;
  double psnr_control = 0.0;
  double ssim_treated = 0.0;
  double ssim_control = 0.0;
  double delta_psnr() const { return psnr_treated - psnr_control; }
  double delta_ssim() const { return ssim_treated - ssim_control; }
};

struct DeltaStats {
  Index pairs = 0;
  double win_rate = 0.0;  // PSNR wins of treated; ties count 1/2
  double mean_delta_psnr = 0.0;
  double sd_delta_psnr = 0.0;  // sample standard deviation (0 for one pair)
  double mean_delta_ssim = 0.0;
  double sd_delta_ssim = 0.0;
};

struct GroupSummary {
  Index resolution = 0;
  SolverKind solver = SolverKind::omp;
  DeltaStats stats;
};

struct ComparisonSummary {
  SourceKind treated = SourceKind::quantum;
  std::vector<PairDelta> pairs;       // in order of first appearance of the treated cell
  std::vector<GroupSummary> groups;   // per (resolution, solver), first-appearance order
  DeltaStats overall;
};

DeltaStats delta_stats(const std::vector<PairDelta>& pairs);

/// Pairs every `treated` report with the other-source report sharing
/// (resolution, solver, seed). Any report without exactly one partner throws PairingError.
ComparisonSummary compare_cells(const std::vector<QualityReport>& reports,
                                SourceKind treated = SourceKind::quantum);

}  // namespace aquaghost
