#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "aquaghost/dct.hpp"
#include "aquaghost/errors.hpp"
#include "aquaghost/random.hpp"
#include "aquaghost/types.hpp"

namespace aquaghost {

enum class Transform { identity, dct2 };

Transform parse_transform(std::string_view name);
std::string_view to_string(Transform transform);

/// Sensing adapter over a dense Eigen matrix. The matrix must outlive the adapter.
template <typename ScalarT>
class DenseSensing {
 public:
  using Scalar = ScalarT;
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit DenseSensing(const MatrixType& a) : a_(&a) {}

  Index rows() const { return a_->rows(); }
  Index cols() const { return a_->cols(); }
  Vector<Scalar> apply(const Vector<Scalar>& x) const { return (*a_) * x; }
  Vector<Scalar> apply_adjoint(const Vector<Scalar>& r) const { return a_->transpose() * r; }
  Vector<Scalar> row(Index i) const { return a_->row(i).transpose(); }
  Grid<Scalar> row_block(Index first, Index count) const { return a_->middleRows(first, count); }

 private:
  const MatrixType* a_;
};


/// Effective dictionary D = A Psi^T, where A is the sensing operator and Psi the
/// orthonormal sparsifying transform (identity or 2D DCT over an R x R grid).
/// Column norms and the Lipschitz constant of D^T D are computed once on first use.
///
/// `Sensing` needs rows(), cols(), apply(x), apply_adjoint(r), row(i) and
/// row_block(first, count), the latter as a dense count x cols grid.
template <typename Sensing>
class Dictionary {
 public:
  using Scalar = typename Sensing::Scalar;
  using VectorType = Vector<Scalar>;

  Dictionary(Sensing sensing, Transform transform)
      : sensing_(std::move(sensing)), transform_(transform), cache_(std::make_shared<Cache>()) {
    if (transform_ == Transform::dct2) {
      side_ = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(sensing_.cols()))));
      require(side_ * side_ == sensing_.cols(), ErrorCode::ShapeError,
              "dct2 transform needs a square image (N = R^2), got N = " + std::to_string(sensing_.cols()));
      dct_ = Dct2<Scalar>(side_, side_);
    }
  }

  Index rows() const { return sensing_.rows(); }
  Index cols() const { return sensing_.cols(); }
  Transform transform() const { return transform_; }
  const Sensing& sensing() const { return sensing_; }

  /// Psi^T s: image (flattened) from transform coefficients.
  VectorType synthesize(const VectorType& s) const {
    if (transform_ == Transform::identity) return s;
    const Grid<Scalar> img = dct_.inverse(as_grid(s, side_, side_));
    return flatten(img);
  }

  /// Psi x: transform coefficients of a flattened image.
  VectorType analyze(const VectorType& x) const {
    if (transform_ == Transform::identity) return x;
    const Grid<Scalar> c = dct_.forward(as_grid(x, side_, side_));
    return flatten(c);
  }

  /// D s
  VectorType apply(const VectorType& s) const { return sensing_.apply(synthesize(s)); }

  /// D^T r
  VectorType adjoint(const VectorType& r) const { return analyze(sensing_.apply_adjoint(r)); }

  /// D e_j
  VectorType column(Index j) const {
    if (transform_ == Transform::identity) {
      VectorType e = VectorType::Zero(cols());
      e[j] = Scalar(1);
      return sensing_.apply(e);
    }
    const Grid<Scalar> b = dct_.basis(j);
    return sensing_.apply(VectorType(flatten(b)));
  }

  /// ||D e_j|| for every j, accumulated over blocks of rows: column norms of D are
  /// the norms over rows of Psi a_i.
  const VectorType& column_norms() const {
    std::call_once(cache_->norms_once, [this] {
      constexpr Index kBlock = 64;
      VectorType sq = VectorType::Zero(cols());
      for (Index first = 0; first < rows(); first += kBlock) {
        const Index count = std::min(kBlock, rows() - first);
        const Grid<Scalar> block = sensing_.row_block(first, count);
        if (transform_ == Transform::identity) {
          sq += block.colwise().squaredNorm().transpose();
        } else {
          sq += dct_.forward_rows(block).colwise().squaredNorm().transpose();
        }
      }
      cache_->norms = sq.cwiseSqrt();
    });
    return cache_->norms;
  }

  /// 1.05 x the largest eigenvalue of D^T D estimated by 50 power iterations from a
  /// fixed pseudo-random start; the estimate is the final Rayleigh quotient.
  Scalar lipschitz() const {
    std::call_once(cache_->lipschitz_once, [this] {
      RandomStream rng(0x4c495053ULL);
      VectorType v(cols());
      for (Index j = 0; j < v.size(); ++j) v[j] = Scalar(2.0 * rng.uniform() - 1.0);
      v.normalize();
      for (int it = 0; it < 50; ++it) {
        VectorType w = adjoint(apply(v));
        const Scalar norm = w.norm();
        if (!(norm > Scalar(0))) break;
        v = w / norm;
      }
      const Scalar estimate = apply(v).squaredNorm();
      if (!(estimate > Scalar(0)) || !std::isfinite(static_cast<double>(estimate))) {
        throw Error(ErrorCode::DegenerateDictionary, "dictionary has no nonzero singular value");
      }
      cache_->lipschitz = Scalar(1.05) * estimate;
    });
    return cache_->lipschitz;
  }

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> to_dense() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d(rows(), cols());
    for (Index j = 0; j < cols(); ++j) d.col(j) = column(j);
    return d;
  }

 private:
  struct Cache {
    std::once_flag norms_once;
    std::once_flag lipschitz_once;
    VectorType norms;
    Scalar lipschitz{};
  };

  Sensing sensing_;
  Transform transform_;
  Index side_ = 0;
  Dct2<Scalar> dct_;
  std::shared_ptr<Cache> cache_;
};

template <typename Sensing>
Dictionary(Sensing, Transform) -> Dictionary<Sensing>;

template <typename Scalar>
Dictionary<DenseSensing<Scalar>> make_dictionary(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                                                 Transform transform = Transform::identity) {
  return Dictionary<DenseSensing<Scalar>>(DenseSensing<Scalar>(a), transform);
}

}  // namespace aquaghost
