#pragma once

#include <cmath>
#include <numbers>

#include "aquaghost/types.hpp"

namespace aquaghost {

/// Orthonormal DCT-II matrix: C(k, i) = a_k cos(pi (2i + 1) k / 2n), a_0 = sqrt(1/n), a_k = sqrt(2/n).
template <typename Scalar = double>
Grid<Scalar> dct_matrix(Index n) {
  Grid<Scalar> c(n, n);
  const Scalar a0 = std::sqrt(Scalar(1) / Scalar(n));
  const Scalar ak = std::sqrt(Scalar(2) / Scalar(n));
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < n; ++i) {
      const Scalar angle = std::numbers::pi_v<Scalar> * Scalar(2 * i + 1) * Scalar(k) / Scalar(2 * n);
      c(k, i) = (k == 0 ? a0 : ak) * std::cos(angle);
    }
  }
  return c;
}

/// Even/odd split of an n-point DCT matrix. Row k of C is symmetric about the centre
/// for even k and antisymmetric for odd k, so C x only needs the folded half-length
/// sums and differences of x.
template <typename Scalar>
class DctFactors {
 public:
  DctFactors() = default;
  explicit DctFactors(Index n) : n_(n) {
    const Grid<Scalar> c = dct_matrix<Scalar>(n);
    const Index h = n / 2;
    even_.resize((n + 1) / 2, (n + 1) / 2);
    odd_.resize(h, h);
    for (Index k = 0; k < n; k += 2) even_.row(k / 2) = c.row(k).head((n + 1) / 2);
    for (Index k = 1; k < n; k += 2) odd_.row(k / 2) = c.row(k).head(h);
  }

  Index size() const { return n_; }

  /// C x, applied to every column of x.
  template <typename Derived>
  Grid<Scalar> apply(const Eigen::MatrixBase<Derived>& x) const {
    const Index h = n_ / 2;
    const Index hc = (n_ + 1) / 2;
    Grid<Scalar> sum(hc, x.cols());
    Grid<Scalar> diff(h, x.cols());
    for (Index i = 0; i < h; ++i) {
      sum.row(i) = x.row(i) + x.row(n_ - 1 - i);
      diff.row(i) = x.row(i) - x.row(n_ - 1 - i);
    }
    if (hc > h) sum.row(h) = x.row(h);
    const Grid<Scalar> ye = even_ * sum;
    const Grid<Scalar> yo = odd_ * diff;
    Grid<Scalar> y(n_, x.cols());
    for (Index k = 0; k < n_; ++k) y.row(k) = k % 2 == 0 ? ye.row(k / 2) : yo.row(k / 2);
    return y;
  }

  /// C^T y, applied to every column of y.
  template <typename Derived>
  Grid<Scalar> apply_transpose(const Eigen::MatrixBase<Derived>& y) const {
    const Index h = n_ / 2;
    const Index hc = (n_ + 1) / 2;
    Grid<Scalar> ye(hc, y.cols());
    Grid<Scalar> yo(h, y.cols());
    for (Index k = 0; k < n_; ++k) {
      if (k % 2 == 0) ye.row(k / 2) = y.row(k);
      else yo.row(k / 2) = y.row(k);
    }
    const Grid<Scalar> a = even_.transpose() * ye;
    const Grid<Scalar> b = odd_.transpose() * yo;
    Grid<Scalar> x(n_, y.cols());
    for (Index i = 0; i < h; ++i) {
      x.row(i) = a.row(i) + b.row(i);
      x.row(n_ - 1 - i) = a.row(i) - b.row(i);
    }
    if (hc > h) x.row(h) = a.row(h);
    return x;
  }

 private:
  Index n_ = 0;
  Grid<Scalar> even_;  // even-k rows, first ceil(n/2) columns
  Grid<Scalar> odd_;   // odd-k rows, first floor(n/2) columns
};

/// Separable 2D orthonormal DCT-II for a fixed grid size, Y = C_r X C_c^T.
template <typename Scalar = double>
class Dct2 {
 public:
  Dct2() = default;
  Dct2(Index rows, Index cols)
      : row_matrix_(dct_matrix<Scalar>(rows)), col_matrix_(dct_matrix<Scalar>(cols)), rows_(rows), cols_(cols) {}

  Index rows() const { return rows_.size(); }
  Index cols() const { return cols_.size(); }

  template <typename Derived>
  Grid<Scalar> forward(const Eigen::MatrixBase<Derived>& grid) const {
    const Grid<Scalar> tmp = rows_.apply(grid).transpose();
    return cols_.apply(tmp).transpose();
  }

  template <typename Derived>
  Grid<Scalar> inverse(const Eigen::MatrixBase<Derived>& coeffs) const {
    const Grid<Scalar> tmp = rows_.apply_transpose(coeffs).transpose();
    return cols_.apply_transpose(tmp).transpose();
  }

  /// forward() applied to every row of `images`, each row a flattened (row-major)
  /// grid. Batching turns the per-image products into two wide products.
  template <typename Derived>
  Grid<Scalar> forward_rows(const Eigen::MatrixBase<Derived>& images) const {
    const Index r = rows();
    const Index c = cols();
    const Index count = images.rows();
    Grid<Scalar> wide(c, r * count);  // block i = X_i^T
    for (Index i = 0; i < count; ++i)
      for (Index y = 0; y < r; ++y) wide.block(0, i * r + y, c, 1) = images.row(i).segment(y * c, c).transpose();
    const Grid<Scalar> half = cols_.apply(wide);  // block i = (X_i C_c^T)^T
    Grid<Scalar> turned(r, c * count);  // block i = X_i C_c^T
    for (Index i = 0; i < count; ++i) turned.block(0, i * c, r, c) = half.block(0, i * r, c, r).transpose();
    const Grid<Scalar> full = rows_.apply(turned);  // block i = C_r X_i C_c^T
    Grid<Scalar> out(count, r * c);
    for (Index i = 0; i < count; ++i)
      for (Index y = 0; y < r; ++y) out.row(i).segment(y * c, c) = full.block(y, i * c, 1, c);
    return out;
  }

  /// Basis image for the flat coefficient index k (row-major over coefficient grid).
  Grid<Scalar> basis(Index k) const {
    const Index p = k / cols();
    const Index q = k % cols();
    return row_matrix_.row(p).transpose() * col_matrix_.row(q);
  }

 private:
  Grid<Scalar> row_matrix_;
  Grid<Scalar> col_matrix_;
  DctFactors<Scalar> rows_;
  DctFactors<Scalar> cols_;
};

template <typename Derived>
Grid<typename Derived::Scalar> dct2_forward(const Eigen::MatrixBase<Derived>& grid) {
  return Dct2<typename Derived::Scalar>(grid.rows(), grid.cols()).forward(grid);
}

template <typename Derived>
Grid<typename Derived::Scalar> dct2_inverse(const Eigen::MatrixBase<Derived>& coeffs) {
  return Dct2<typename Derived::Scalar>(coeffs.rows(), coeffs.cols()).inverse(coeffs);
}

}  // namespace aquaghost
