#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "aquaghost/acquisition.hpp"
#include "aquaghost/dictionary.hpp"
#include "aquaghost/dmd.hpp"
#include "aquaghost/errors.hpp"

namespace aquaghost {

enum class SolverKind { mp, omp, bp_ista };

SolverKind parse_solver(std::string_view name);
std::string_view to_string(SolverKind solver);

struct RecoveryConfig {
  SolverKind solver = SolverKind::omp;
  Index sparsity_k = 1;       // mp / omp: number of distinct atoms
  double lambda_reg = 1e-3;   // bp_ista: l1 weight
  /// bp_ista: interpret lambda_reg as a fraction of ||D^T y||_inf.
  bool lambda_relative = false;
  Index max_iterations = 1000;
  double residual_tol = 1e-6;
  Transform transform = Transform::dct2;

  /// Checks the parameters the chosen solver uses against dictionary width `n`.
  void validate(Index n) const;
};

/// Solver output in coefficient space.
template <typename Scalar>
struct SparseSolution {
  Vector<Scalar> coefficients;
  std::vector<Index> support;        // greedy: selection order; ista: nonzero indices
  Index iterations = 0;
  Scalar residual_norm = 0;          // ||y - D s||
  std::vector<Scalar> trace;         // per iteration, starting at the zero solution:
                                     // greedy ||r||, ista F(s)
};

namespace detail {

/// argmax_j |c_j| over `allowed` entries; lowest index wins ties. Returns -1 if all are excluded.
template <typename Scalar>
Index argmax_abs(const Vector<Scalar>& c, const std::vector<char>* excluded) {
  Index best = -1;
  Scalar best_value = Scalar(-1);
  for (Index j = 0; j < c.size(); ++j) {
    if (excluded && (*excluded)[static_cast<std::size_t>(j)]) continue;
    const Scalar v = std::abs(c[j]);
    if (v > best_value) {
      best_value = v;
      best = j;
    }
  }
  return best;
}

template <typename Dict>
const Vector<typename Dict::Scalar>& checked_norms(const Dict& dict) {
  const auto& norms = dict.column_norms();
  for (Index j = 0; j < norms.size(); ++j) {
    if (!(norms[j] > 0)) {
      throw Error(ErrorCode::DegenerateDictionary, "dictionary column " + std::to_string(j) + " is zero");
    }
  }
  return norms;
}

template <typename Scalar>
bool converged(Scalar residual, Scalar y_norm, double tol) {
  return residual <= Scalar(tol) * y_norm;
}

}  // namespace detail

/// Matching pursuit on the column-normalized dictionary: pick the atom with the
/// largest normalized correlation, add its projection to the coefficient, remove it
/// from the residual. Atoms may be picked repeatedly; stops once `sparsity_k`
/// distinct atoms are in use, the relative residual reaches `residual_tol`, or
/// `max_iterations` is hit.
template <typename Dict>
SparseSolution<typename Dict::Scalar> mp_solve(const Vector<typename Dict::Scalar>& y, const Dict& dict,
                                               const RecoveryConfig& config) {
  using Scalar = typename Dict::Scalar;
  require(y.size() == dict.rows(), ErrorCode::ShapeError, "y length != dictionary rows");
  config.validate(dict.cols());
  const auto& norms = detail::checked_norms(dict);

  SparseSolution<Scalar> out;
  out.coefficients = Vector<Scalar>::Zero(dict.cols());
  Vector<Scalar> r = y;
  const Scalar y_norm = y.norm();
  Scalar r_norm = y_norm;
  std::vector<char> active(static_cast<std::size_t>(dict.cols()), 0);
  out.trace.push_back(r_norm);

  while (!detail::converged(r_norm, y_norm, config.residual_tol) && out.iterations < config.max_iterations &&
         static_cast<Index>(out.support.size()) < config.sparsity_k) {
    const Vector<Scalar> corr = (dict.adjoint(r).array() / norms.array()).matrix();
    const Index j = detail::argmax_abs<Scalar>(corr, nullptr);
    if (corr[j] == Scalar(0)) break;
    const Scalar alpha = corr[j] / norms[j];
    out.coefficients[j] += alpha;
    r -= alpha * dict.column(j);
    if (!active[static_cast<std::size_t>(j)]) {
      active[static_cast<std::size_t>(j)] = 1;
      out.support.push_back(j);
    }
    ++out.iterations;
    r_norm = r.norm();
    out.trace.push_back(r_norm);
  }
  out.residual_norm = r_norm;
  return out;
}

/// Orthogonal matching pursuit: MP selection (restricted to inactive atoms), then a
/// least-squares re-fit of every active coefficient through the normal equations
/// with 1e-12 added to the Gram diagonal.
template <typename Dict>
SparseSolution<typename Dict::Scalar> omp_solve(const Vector<typename Dict::Scalar>& y, const Dict& dict,
                                                const RecoveryConfig& config) {
  using Scalar = typename Dict::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require(y.size() == dict.rows(), ErrorCode::ShapeError, "y length != dictionary rows");
  config.validate(dict.cols());
  const auto& norms = detail::checked_norms(dict);

  const Index m = dict.rows();
  const Index k_max = std::min(config.sparsity_k, dict.cols());
  SparseSolution<Scalar> out;
  out.coefficients = Vector<Scalar>::Zero(dict.cols());
  Vector<Scalar> r = y;
  const Scalar y_norm = y.norm();
  Scalar r_norm = y_norm;
  std::vector<char> active(static_cast<std::size_t>(dict.cols()), 0);
  out.trace.push_back(r_norm);

  Matrix atoms(m, k_max);
  Matrix gram(k_max, k_max);
  Vector<Scalar> rhs(k_max);
  Vector<Scalar> fit;

  while (!detail::converged(r_norm, y_norm, config.residual_tol) && out.iterations < config.max_iterations &&
         static_cast<Index>(out.support.size()) < k_max) {
    const Vector<Scalar> corr = (dict.adjoint(r).array() / norms.array()).matrix();
    const Index j = detail::argmax_abs<Scalar>(corr, &active);
    if (j < 0 || corr[j] == Scalar(0)) break;

    const Index k = static_cast<Index>(out.support.size());
    atoms.col(k) = dict.column(j);
    for (Index i = 0; i < k; ++i) {
      gram(k, i) = gram(i, k) = atoms.col(i).dot(atoms.col(k));
    }
    gram(k, k) = atoms.col(k).squaredNorm() + Scalar(1e-12);
    rhs[k] = atoms.col(k).dot(y);
    active[static_cast<std::size_t>(j)] = 1;
    out.support.push_back(j);

    const Eigen::LLT<Matrix> llt(gram.topLeftCorner(k + 1, k + 1));
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::IllConditionedActiveSet,
                  "active Gram matrix not positive definite at size " + std::to_string(k + 1));
    }
    fit = llt.solve(rhs.head(k + 1));
    if (!fit.allFinite()) {
      throw Error(ErrorCode::IllConditionedActiveSet, "non-finite least-squares coefficients");
    }
    r = y - atoms.leftCols(k + 1) * fit;
    ++out.iterations;
    r_norm = r.norm();
    out.trace.push_back(r_norm);
  }
  for (std::size_t i = 0; i < out.support.size(); ++i) out.coefficients[out.support[i]] = fit[static_cast<Index>(i)];
  out.residual_norm = r_norm;
  return out;
}

/// l1-regularized least squares, F(s) = 1/2 ||y - D s||^2 + lambda ||s||_1, by
/// proximal gradient (ISTA) with step 1/L, L = dict.lipschitz(). Stops when the
/// relative objective change drops below `residual_tol`.
template <typename Dict>
SparseSolution<typename Dict::Scalar> ista_solve(const Vector<typename Dict::Scalar>& y, const Dict& dict,
                                                 const RecoveryConfig& config) {
  using Scalar = typename Dict::Scalar;
  require(y.size() == dict.rows(), ErrorCode::ShapeError, "y length != dictionary rows");
  config.validate(dict.cols());

  SparseSolution<Scalar> out;
  out.coefficients = Vector<Scalar>::Zero(dict.cols());
  const Scalar y_norm = y.norm();
  Scalar f_prev = Scalar(0.5) * y_norm * y_norm;
  out.trace.push_back(f_prev);
  out.residual_norm = y_norm;
  if (y_norm == Scalar(0)) return out;

  const Scalar lambda = config.lambda_relative
                            ? Scalar(config.lambda_reg) * dict.adjoint(y).cwiseAbs().maxCoeff()
                            : Scalar(config.lambda_reg);
  const Scalar step = Scalar(1) / dict.lipschitz();
  const Scalar shrink = step * lambda;

  Vector<Scalar>& s = out.coefficients;
  Vector<Scalar> ds = Vector<Scalar>::Zero(y.size());
  for (Index t = 1; t <= config.max_iterations; ++t) {
    const Vector<Scalar> grad = dict.adjoint(ds - y);
    s = (s - step * grad).unaryExpr([shrink](Scalar v) {
      if (v > shrink) return v - shrink;
      if (v < -shrink) return v + shrink;
      return Scalar(0);
    });
    ds = dict.apply(s);
    const Scalar f = Scalar(0.5) * (y - ds).squaredNorm() + lambda * s.template lpNorm<1>();
    if (!std::isfinite(static_cast<double>(f))) {
      throw Error(ErrorCode::NumericalDivergence, "objective became non-finite at iteration " + std::to_string(t));
    }
    out.trace.push_back(f);
    out.iterations = t;
    const bool done = std::abs(f - f_prev) / std::max(f_prev, Scalar(1e-12)) < Scalar(config.residual_tol);
    f_prev = f;
    if (done) break;
  }
  for (Index j = 0; j < s.size(); ++j)
    if (s[j] != Scalar(0)) out.support.push_back(j);
  out.residual_norm = (y - ds).norm();
  return out;
}

template <typename Dict>
SparseSolution<typename Dict::Scalar> solve(const Vector<typename Dict::Scalar>& y, const Dict& dict,
                                            const RecoveryConfig& config) {
  switch (config.solver) {
    case SolverKind::mp: return mp_solve(y, dict, config);
    case SolverKind::omp: return omp_solve(y, dict, config);
    case SolverKind::bp_ista: return ista_solve(y, dict, config);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown solver");
}

/// Dense-matrix conveniences: D = A Psi^T with the transform from `config`.
template <typename Scalar>
SparseSolution<Scalar> mp_solve(const Vector<Scalar>& y, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                                const RecoveryConfig& config) {
  return mp_solve(y, make_dictionary(a, config.transform), config);
}
template <typename Scalar>
SparseSolution<Scalar> omp_solve(const Vector<Scalar>& y, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                                 const RecoveryConfig& config) {
  return omp_solve(y, make_dictionary(a, config.transform), config);
}
template <typename Scalar>
SparseSolution<Scalar> ista_solve(const Vector<Scalar>& y, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                                  const RecoveryConfig& config) {
  return ista_solve(y, make_dictionary(a, config.transform), config);
}

// ---------------------------------------------------------------------------------------------
// Exhaustive oracle

template <typename Scalar>
struct OracleResult {
  std::vector<Index> support;  // ascending
  Vector<Scalar> coefficients;  // on `support`, same order
  Scalar residual_norm = 0;
};

inline constexpr double kOracleMaxSubsets = 1e6;

/// Number of k-subsets of n items, saturating above kOracleMaxSubsets.
inline double binomial_capped(Index n, Index k) {
  if (k < 0 || k > n) return 0.0;
  double c = 1.0;
  for (Index i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (c > 2 * kOracleMaxSubsets) return c;
  }
  return std::round(c);
}

namespace detail {

// Depth-first lexicographic enumeration of k-subsets with an incrementally extended
// Cholesky factor of the Gram matrix; `visit(support, explained_energy)` at leaves,
// where ||y||^2 - explained_energy is the least-squares residual energy.
template <typename Scalar, typename Visit>
void enumerate_supports(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& gram,
                        const Vector<Scalar>& dty, Index k, Visit&& visit) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = gram.rows();
  std::vector<Index> support(static_cast<std::size_t>(k));
  Matrix chol = Matrix::Zero(k, k);
  Vector<Scalar> w = Vector<Scalar>::Zero(k);
  std::vector<Scalar> energy(static_cast<std::size_t>(k + 1), Scalar(0));
  std::vector<char> dependent(static_cast<std::size_t>(k), 0);
  const Scalar eps = Scalar(1e-13) * std::max(gram.diagonal().maxCoeff(), Scalar(1e-300));

  auto recurse = [&](auto&& self, Index depth, Index start) -> void {
    if (depth == k) {
      visit(support, energy[static_cast<std::size_t>(k)]);
      return;
    }
    for (Index j = start; j <= n - (k - depth); ++j) {
      support[static_cast<std::size_t>(depth)] = j;
      Scalar diag2 = gram(j, j);
      for (Index i = 0; i < depth; ++i) {
        if (dependent[static_cast<std::size_t>(i)]) {
          chol(depth, i) = Scalar(0);
          continue;
        }
        Scalar v = gram(support[static_cast<std::size_t>(i)], j);
        for (Index l = 0; l < i; ++l) v -= chol(i, l) * chol(depth, l);
        chol(depth, i) = v / chol(i, i);
        diag2 -= chol(depth, i) * chol(depth, i);
      }
      Scalar gain = Scalar(0);
      dependent[static_cast<std::size_t>(depth)] = !(diag2 > eps);
      if (diag2 > eps) {
        chol(depth, depth) = std::sqrt(diag2);
        Scalar v = dty[j];
        for (Index l = 0; l < depth; ++l) v -= chol(depth, l) * w[l];
        w[depth] = v / chol(depth, depth);
        gain = w[depth] * w[depth];
      } else {
        // Column in the span of the prefix: contributes no energy and is skipped
        // when deeper columns are orthogonalized.
        chol(depth, depth) = Scalar(1);
        w[depth] = Scalar(0);
      }
      energy[static_cast<std::size_t>(depth + 1)] = energy[static_cast<std::size_t>(depth)] + gain;
      self(self, depth + 1, j + 1);
    }
  };
  recurse(recurse, 0, 0);
}

template <typename Scalar, typename Derived>
OracleResult<Scalar> qr_fit(const Vector<Scalar>& y, const Eigen::MatrixBase<Derived>& d,
                            const std::vector<Index>& support) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix sub(d.rows(), static_cast<Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) sub.col(static_cast<Index>(i)) = d.col(support[i]);
  OracleResult<Scalar> out;
  out.support = support;
  out.coefficients = sub.colPivHouseholderQr().solve(y);
  out.residual_norm = (y - sub * out.coefficients).norm();
  return out;
}

}  // namespace detail

/// Global minimum-residual K-support by exhaustive least squares. Candidates are
/// ranked through the normal equations; every support within 1e-10 ||y||^2 of the
/// best is re-fitted by column-pivoted QR, and the smallest QR residual wins (ties go
/// to the lexicographically smallest support). Throws OracleTooLarge if C(N, K) > 1e6.
template <typename Derived>
OracleResult<typename Derived::Scalar> exhaustive_support_oracle(const Vector<typename Derived::Scalar>& y,
                                                                 const Eigen::MatrixBase<Derived>& d, Index k) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require(y.size() == d.rows(), ErrorCode::ShapeError, "y length != dictionary rows");
  require(k >= 0 && k <= d.cols(), ErrorCode::InvalidArgument, "oracle K outside [0, N]");
  if (binomial_capped(d.cols(), k) > kOracleMaxSubsets) {
    throw Error(ErrorCode::OracleTooLarge, "C(" + std::to_string(d.cols()) + ", " + std::to_string(k) + ") > 1e6");
  }
  if (k == 0) return {{}, Vector<Scalar>(), y.norm()};

  const Matrix gram = d.transpose() * d;
  const Vector<Scalar> dty = d.transpose() * y;
  const Scalar y2 = y.squaredNorm();
  if (y2 == Scalar(0)) {
    std::vector<Index> first(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) first[static_cast<std::size_t>(i)] = i;
    return {first, Vector<Scalar>::Zero(k), Scalar(0)};
  }

  Scalar best_energy = Scalar(-1);
  detail::enumerate_supports<Scalar>(gram, dty, k, [&](const std::vector<Index>&, Scalar e) {
    best_energy = std::max(best_energy, e);
  });

  const Scalar slack = Scalar(1e-10) * y2;
  OracleResult<Scalar> best;
  bool have = false;
  detail::enumerate_supports<Scalar>(gram, dty, k, [&](const std::vector<Index>& support, Scalar e) {
    if (e + slack < best_energy) return;
    OracleResult<Scalar> cand = detail::qr_fit<Scalar>(y, d, support);
    if (!have || cand.residual_norm < best.residual_norm) {
      best = std::move(cand);
      have = true;
    }
  });
  return best;
}

// ---------------------------------------------------------------------------------------------
// Image-level reconstruction

/// Recovered image and solver diagnostics.
struct Reconstruction {
  GridXd image;          // raw, may leave [0, 1]
  GridXd image_clipped;  // clamped to [0, 1]
  VectorXd coefficients;  // transform coefficients s
  std::vector<Index> support;
  Index iterations = 0;
  double residual_norm = 0.0;  // in normalized measurement units
  std::vector<double> objective_trace;
  SolverKind solver = SolverKind::omp;

  SceneImage clipped_scene() const { return SceneImage(image_clipped); }
};

using PatternDictionary = Dictionary<MeasurementMatrix>;

inline PatternDictionary make_dictionary(const PatternSet& patterns, Transform transform) {
  return PatternDictionary(MeasurementMatrix(patterns), transform);
}
PatternDictionary make_dictionary(PatternSet&&, Transform) = delete;

/// Counts per unit of <a_i, x>: exposure * signal_scale / N. Dividing y by this puts
/// the problem on the scale y ~ A x.
double measurement_scale(const MeasurementVector& measurements);

/// Normalizes y by measurement_scale, solves against D = A Psi^T, inverse-transforms
/// the coefficients and stores raw and clipped images. Throws MismatchedM when the
/// measurement and pattern counts disagree.
Reconstruction reconstruct(const MeasurementVector& measurements, const PatternSet& patterns,
                           const RecoveryConfig& config);

/// Same, reusing a dictionary (and its cached norms / Lipschitz constant) built over
/// the pattern set the measurements were taken with. Its transform must match config.
Reconstruction reconstruct(const MeasurementVector& measurements, const PatternDictionary& dictionary,
                           const RecoveryConfig& config);

/// CSV `iteration,objective_or_residual`.
void write_trace_csv(const Reconstruction& reconstruction, const std::filesystem::path& path);

}  // namespace aquaghost
