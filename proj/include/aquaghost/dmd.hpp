#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <variant>
#include <vector>

#include "aquaghost/types.hpp"

namespace aquaghost {

enum class PatternKind : std::uint8_t { bernoulli01 = 0, bernoulli_pm1 = 1, gaussian = 2 };

PatternKind parse_pattern_kind(std::string_view name);
std::string_view to_string(PatternKind kind);

/// Dense 0/1 matrix packed eight entries per byte, stored twice (row-packed and
/// column-packed) so both A x and A^T r stream contiguous bytes.
///
/// Products use per-byte lookup tables: for every group of eight columns the 256
/// possible partial sums of x are tabulated, so each row costs one table read per
/// byte instead of eight multiply-adds. Summation order is fixed.
class BitMatrix {
 public:
  BitMatrix() = default;
  /// `row_bytes` holds rows() * ceil(cols / 8) bytes; bit b of byte k in row i is entry (i, 8k + b).
  BitMatrix(Index rows, Index cols, std::vector<std::uint8_t> row_bytes);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool coeff(Index i, Index j) const {
    return (row_bytes_[static_cast<std::size_t>(i * row_stride_ + j / 8)] >> (j % 8)) & 1u;
  }
  Index row_count(Index i) const;
  std::uint64_t total_count() const;

  VectorXd multiply(const VectorXd& x) const;
  VectorXd multiply_transpose(const VectorXd& r) const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Index row_stride_ = 0;  // bytes per row
  Index col_stride_ = 0;  // bytes per column
  std::vector<std::uint8_t> row_bytes_;
  std::vector<std::uint8_t> col_bytes_;
};

/// M modulation patterns over an R x R micromirror grid; row i of the measurement
/// matrix is pattern i flattened row-major.
class PatternSet {
 public:
  PatternSet() = default;

  /// Wraps explicit entries (M x R^2). Entries must match the kind's alphabet.
  static PatternSet from_entries(PatternKind kind, Index resolution, const GridXd& entries,
                                 std::uint64_t seed = 0);

  PatternKind kind() const { return kind_; }
  Index num_patterns() const { return num_patterns_; }
  Index resolution() const { return resolution_; }
  Index num_pixels() const { return resolution_ * resolution_; }
  std::uint64_t seed() const { return seed_; }

  double entry(Index i, Index j) const;
  VectorXd row(Index i) const;
  /// Rows first .. first + count - 1 as a dense grid.
  GridXd rows(Index first, Index count) const;

  bool is_binary() const { return kind_ != PatternKind::gaussian; }
  /// Packed 0/1 bits (for bernoulli_pm1, bit 1 means +1). Null for gaussian sets.
  const BitMatrix* bits() const { return std::get_if<BitMatrix>(&entries_); }
  /// Dense entries for gaussian sets, null otherwise.
  const GridXd* dense() const { return std::get_if<GridXd>(&entries_); }

 private:
  friend PatternSet generate_patterns(PatternKind, Index, Index, std::uint64_t);

  PatternKind kind_ = PatternKind::bernoulli01;
  Index num_patterns_ = 0;
  Index resolution_ = 0;
  std::uint64_t seed_ = 0;
  std::variant<BitMatrix, GridXd> entries_;
};

/// Largest gaussian pattern set held densely (entries); bigger requests throw TooLarge.
inline constexpr std::uint64_t kMaxDenseEntries = std::uint64_t{1} << 27;
/// Largest binary pattern set (entries).
inline constexpr std::uint64_t kMaxBinaryEntries = std::uint64_t{1} << 34;

/// Deterministic pattern generation from `seed`, row-major, one draw per entry:
///  - bernoulli01: top bit of one 64-bit draw;
///  - bernoulli_pm1: same bit mapped to {-1, +1};
///  - gaussian: Box-Muller (cosine branch, two uniforms), rounded to 6 decimals,
///    then divided by sqrt(M).
PatternSet generate_patterns(PatternKind kind, Index num_patterns, Index resolution, std::uint64_t seed);

/// Fraction of open (1) micromirrors in pattern `row`. Binary 0/1 sets only.
double open_fraction(const PatternSet& patterns, Index row);

/// open_fraction for bernoulli01, mean |entry| for the other kinds.
double effective_open_fraction(const PatternSet& patterns, Index row);

/// Access contract of the M x N measurement matrix built from a PatternSet. Holds
/// a reference; the PatternSet must outlive it.
class MeasurementMatrix {
 public:
  using Scalar = double;

  explicit MeasurementMatrix(const PatternSet& patterns) : patterns_(&patterns) {}
  explicit MeasurementMatrix(PatternSet&&) = delete;

  Index rows() const { return patterns_->num_patterns(); }
  Index cols() const { return patterns_->num_pixels(); }
  double coeff(Index i, Index j) const { return patterns_->entry(i, j); }
  VectorXd row(Index i) const { return patterns_->row(i); }
  GridXd row_block(Index first, Index count) const { return patterns_->rows(first, count); }
  const PatternSet& patterns() const { return *patterns_; }

  /// A x
  VectorXd apply(const VectorXd& x) const;
  /// A^T r
  VectorXd apply_adjoint(const VectorXd& r) const;

  GridXd to_dense() const;

 private:
  const PatternSet* patterns_;
};

inline MeasurementMatrix as_matrix(const PatternSet& patterns) { return MeasurementMatrix(patterns); }
MeasurementMatrix as_matrix(PatternSet&&) = delete;

/// Flat dump: "AGPM", kind byte, M and R as little-endian u32, then M * R^2 entries
/// row-major (u8 for binary kinds with 1 meaning open / +1, little-endian f32 for gaussian).
void write_patterns(const PatternSet& patterns, const std::filesystem::path& path);
PatternSet read_patterns(const std::filesystem::path& path);

}  // namespace aquaghost
