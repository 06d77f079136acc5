#pragma once

#include <Eigen/Core>

namespace aquaghost {

using Index = Eigen::Index;

/// Row-major 2D grid; pixel (i, j) sits at flat offset i * cols + j.
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using GridXd = Grid<double>;
using VectorXd = Vector<double>;

/// Flat row-major view of a grid as a vector.
template <typename Scalar>
Eigen::Map<const Vector<Scalar>> flatten(const Grid<Scalar>& g) {
  return {g.data(), g.size()};
}

/// R x R grid view of a length-R^2 vector.
template <typename Scalar>
Eigen::Map<const Grid<Scalar>> as_grid(const Vector<Scalar>& v, Index rows, Index cols) {
  return {v.data(), rows, cols};
}

}  // namespace aquaghost
