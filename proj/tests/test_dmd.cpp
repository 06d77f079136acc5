#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "aquaghost/dmd.hpp"
#include "aquaghost/errors.hpp"
#include "aquaghost/random.hpp"
#include "oracles.hpp"

using namespace aquaghost;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aquaghost::Error");
  return ErrorCode::SpecError;
}

VectorXd test_vector(Index n, std::uint64_t seed) {
  RandomStream rng(seed);
  VectorXd v(n);
  for (Index k = 0; k < n; ++k) v[k] = 2.0 * rng.uniform() - 1.0;
  return v;
}

}  // namespace

TEST_CASE("bernoulli01 open fraction") {
  const PatternSet p = generate_patterns(PatternKind::bernoulli01, 1000, 8, 42);
  const double total = static_cast<double>(p.bits()->total_count()) / (1000.0 * 64.0);
  CHECK(total >= 0.47);
  CHECK(total <= 0.53);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const PatternSet q = generate_patterns(PatternKind::bernoulli01, 200, 10, seed);
    double mean = 0.0;
    for (Index i = 0; i < 200; ++i) mean += open_fraction(q, i) / 200.0;
    CHECK(mean >= 0.45);
    CHECK(mean <= 0.55);
  }
}

TEST_CASE("open_fraction examples") {
  GridXd e = GridXd::Zero(3, 64);
  e.row(0).setOnes();
  e.row(2).head(32).setOnes();
  const PatternSet p = PatternSet::from_entries(PatternKind::bernoulli01, 8, e);
  CHECK(open_fraction(p, 0) == 1.0);
  CHECK(open_fraction(p, 1) == 0.0);
  CHECK(open_fraction(p, 2) == 0.5);

  const PatternSet g = generate_patterns(PatternKind::gaussian, 4, 4, 0);
  const PatternSet s = generate_patterns(PatternKind::bernoulli_pm1, 4, 4, 0);
  CHECK(code_of([&] { open_fraction(g, 0); }) == ErrorCode::WrongPatternKind);
  CHECK(code_of([&] { open_fraction(s, 0); }) == ErrorCode::WrongPatternKind);
  CHECK(effective_open_fraction(s, 0) == 1.0);
  CHECK(effective_open_fraction(g, 1) == doctest::Approx(g.dense()->row(1).cwiseAbs().mean()));
}

TEST_CASE("gaussian patterns") {
  const PatternSet g = generate_patterns(PatternKind::gaussian, 64, 8, 0);
  const GridXd& a = *g.dense();
  const double target = std::sqrt(2.0 / std::numbers::pi) / 8.0;
  for (Index j = 0; j < a.cols(); ++j) {
    // Column means of |a| over only 64 draws scatter; the pooled mean must be close.
    CHECK(a.col(j).norm() >= 0.5);
    CHECK(a.col(j).norm() <= 1.5);
  }
  CHECK(a.cwiseAbs().mean() == doctest::Approx(target).epsilon(0.2));
  // Entries sit on a 1e-6 grid before the 1/sqrt(M) scaling.
  for (Index k = 0; k < 50; ++k) {
    const double z = a.data()[k] * 8.0;
    CHECK(std::abs(z * 1e6 - std::round(z * 1e6)) < 1e-6);
  }
}

TEST_CASE("generation is deterministic") {
  for (PatternKind kind : {PatternKind::bernoulli01, PatternKind::bernoulli_pm1, PatternKind::gaussian}) {
    const PatternSet a = generate_patterns(kind, 37, 9, 5);
    const PatternSet b = generate_patterns(kind, 37, 9, 5);
    const PatternSet c = generate_patterns(kind, 37, 9, 6);
    CHECK(as_matrix(a).to_dense() == as_matrix(b).to_dense());
    CHECK(as_matrix(a).to_dense() != as_matrix(c).to_dense());
  }
}

TEST_CASE("products match naive loops") {
  // Odd sizes exercise partial bytes in both packings.
  for (PatternKind kind : {PatternKind::bernoulli01, PatternKind::bernoulli_pm1, PatternKind::gaussian}) {
    const PatternSet p = generate_patterns(kind, 29, 7, 11);
    const MeasurementMatrix a = as_matrix(p);
    const oracle::Matrix dense = a.to_dense();
    for (std::uint64_t s = 0; s < 5; ++s) {
      const VectorXd x = test_vector(a.cols(), s);
      const VectorXd r = test_vector(a.rows(), 100 + s);
      if (kind == PatternKind::gaussian) {
        CHECK(a.apply(x) == oracle::matvec(dense, x));
        CHECK(a.apply_adjoint(r) == oracle::matvec_transpose(dense, r));
      } else {
        CHECK((a.apply(x) - oracle::matvec(dense, x)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((a.apply_adjoint(r) - oracle::matvec_transpose(dense, r)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
    for (Index i = 0; i < a.rows(); ++i) CHECK(a.row(i) == VectorXd(dense.row(i).transpose()));
    CHECK(p.rows(3, 4) == dense.middleRows(3, 4));
  }
}

TEST_CASE("single open pixel selects that pixel") {
  GridXd e = GridXd::Zero(1, 16);
  e(0, 5) = 1.0;
  const PatternSet p = PatternSet::from_entries(PatternKind::bernoulli01, 4, e);
  const MeasurementMatrix a = as_matrix(p);
  const VectorXd x = test_vector(16, 3);
  CHECK(a.apply(x)[0] == x[5]);
}

TEST_CASE("orthogonal +-1 rows give a diagonal Gram matrix") {
  // Search seeds for a 4 x 4 set with mutually orthogonal rows.
  bool found = false;
  for (std::uint64_t seed = 0; seed < 5000 && !found; ++seed) {
    const PatternSet p = generate_patterns(PatternKind::bernoulli_pm1, 4, 2, seed);
    const oracle::Matrix a = as_matrix(p).to_dense();
    const oracle::Matrix rows = a * a.transpose();
    if ((rows - 4.0 * oracle::Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() != 0.0) continue;
    found = true;
    const oracle::Matrix gram = a.transpose() * a;
    CHECK((gram - 4.0 * oracle::Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(found);
}

TEST_CASE("pattern files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "aquaghost-tests";
  std::filesystem::create_directories(dir);
  for (PatternKind kind : {PatternKind::bernoulli01, PatternKind::bernoulli_pm1, PatternKind::gaussian}) {
    const PatternSet p = generate_patterns(kind, 13, 5, 9);
    const auto path = dir / "patterns.bin";
    write_patterns(p, path);
    CHECK(std::filesystem::file_size(path) ==
          13u + 13u * 25u * (kind == PatternKind::gaussian ? 4u : 1u));
    const PatternSet q = read_patterns(path);
    CHECK(q.kind() == kind);
    CHECK(q.num_patterns() == 13);
    CHECK(q.resolution() == 5);
    const GridXd a = as_matrix(p).to_dense();
    const GridXd b = as_matrix(q).to_dense();
    if (kind == PatternKind::gaussian) {
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
    } else {
      CHECK(a == b);
    }
  }
}

TEST_CASE("size limits") {
  CHECK(code_of([] { generate_patterns(PatternKind::gaussian, 9720, 180, 0); }) == ErrorCode::TooLarge);
  CHECK(code_of([] { generate_patterns(PatternKind::bernoulli01, 0, 8, 0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { generate_patterns(PatternKind::bernoulli01, 4, 1, 0); }) == ErrorCode::InvalidArgument);
}
