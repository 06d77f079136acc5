#include "aquaghost/dmd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <string>

#include "aquaghost/errors.hpp"
#include "aquaghost/random.hpp"

namespace aquaghost {

namespace {

constexpr Index kTableChunk = 128;  // byte positions per table block (256 KiB of doubles)

Index bytes_for(Index bits) { return (bits + 7) / 8; }

// out[i] += sum over set bits of packed[i * stride + k] of v[8k + b], for i < out.size().
void table_product(const std::vector<std::uint8_t>& packed, Index stride, const VectorXd& v,
                   VectorXd& out) {
  std::vector<double> table(static_cast<std::size_t>(kTableChunk) * 256);
  const Index n = v.size();
  for (Index k0 = 0; k0 < stride; k0 += kTableChunk) {
    const Index k1 = std::min(stride, k0 + kTableChunk);
    for (Index k = k0; k < k1; ++k) {
      double* t = table.data() + (k - k0) * 256;
      t[0] = 0.0;
      for (unsigned b = 1; b < 256; ++b) {
        const Index idx = 8 * k + std::countr_zero(b);
        t[b] = t[b & (b - 1)] + (idx < n ? v[idx] : 0.0);
      }
    }
    // Four rows at a time keeps four independent table reads in flight.
    const Index rows = out.size();
    Index i = 0;
    for (; i + 4 <= rows; i += 4) {
      const std::uint8_t* b0 = packed.data() + i * stride;
      const std::uint8_t* b1 = b0 + stride;
      const std::uint8_t* b2 = b1 + stride;
      const std::uint8_t* b3 = b2 + stride;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (Index k = k0; k < k1; ++k) {
        const double* t = table.data() + (k - k0) * 256;
        s0 += t[b0[k]];
        s1 += t[b1[k]];
        s2 += t[b2[k]];
        s3 += t[b3[k]];
      }
      out[i] += s0;
      out[i + 1] += s1;
      out[i + 2] += s2;
      out[i + 3] += s3;
    }
    for (; i < rows; ++i) {
      const std::uint8_t* b = packed.data() + i * stride;
      double s0 = 0.0;
      for (Index k = k0; k < k1; ++k) s0 += table[static_cast<std::size_t>((k - k0) * 256 + b[k])];
      out[i] += s0;
    }
  }
}

// Byte r of `x` holds bits (r, 0..7); the result has byte c holding bits (0..7, c).
std::uint64_t transpose8x8(std::uint64_t x) {
  std::uint64_t t = (x ^ (x >> 7)) & 0x00AA00AA00AA00AAULL;
  x ^= t ^ (t << 7);
  t = (x ^ (x >> 14)) & 0x0000CCCC0000CCCCULL;
  x ^= t ^ (t << 14);
  t = (x ^ (x >> 28)) & 0x00000000F0F0F0F0ULL;
  x ^= t ^ (t << 28);
  return x;
}

std::uint64_t checked_entries(Index m, Index n) {
  const auto um = static_cast<std::uint64_t>(m);
  const auto un = static_cast<std::uint64_t>(n);
  if (un != 0 && um > std::numeric_limits<std::uint64_t>::max() / un) {
    throw Error(ErrorCode::TooLarge, "M x N overflows 64 bits");
  }
  return um * un;
}

}  // namespace

PatternKind parse_pattern_kind(std::string_view name) {
  if (name == "bernoulli01") return PatternKind::bernoulli01;
  if (name == "bernoulli_pm1") return PatternKind::bernoulli_pm1;
  if (name == "gaussian") return PatternKind::gaussian;
  throw Error(ErrorCode::InvalidArgument, "unknown pattern kind '" + std::string(name) + "'");
}

std::string_view to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::bernoulli01: return "bernoulli01";
    case PatternKind::bernoulli_pm1: return "bernoulli_pm1";
    case PatternKind::gaussian: return "gaussian";
  }
  return "?";
}

// ---------------------------------------------------------------------------------------------
// BitMatrix

BitMatrix::BitMatrix(Index rows, Index cols, std::vector<std::uint8_t> row_bytes)
    : rows_(rows),
      cols_(cols),
      row_stride_(bytes_for(cols)),
      col_stride_(bytes_for(rows)),
      row_bytes_(std::move(row_bytes)) {
  require(static_cast<Index>(row_bytes_.size()) == rows_ * row_stride_, ErrorCode::ShapeError,
          "packed row buffer has the wrong size");
  // Transpose in 8 x 8 bit blocks: eight row bytes in, eight column bytes out.
  col_bytes_.assign(static_cast<std::size_t>(cols_ * col_stride_), 0);
  for (Index i0 = 0; i0 < rows_; i0 += 8) {
    for (Index k = 0; k < row_stride_; ++k) {
      std::uint64_t block = 0;
      for (Index r = 0; r < 8 && i0 + r < rows_; ++r) {
        block |= std::uint64_t{row_bytes_[static_cast<std::size_t>((i0 + r) * row_stride_ + k)]} << (8 * r);
      }
      block = transpose8x8(block);
      for (Index c = 0; c < 8 && 8 * k + c < cols_; ++c) {
        col_bytes_[static_cast<std::size_t>((8 * k + c) * col_stride_ + i0 / 8)] =
            static_cast<std::uint8_t>(block >> (8 * c));
      }
    }
  }
}

Index BitMatrix::row_count(Index i) const {
  Index count = 0;
  const std::uint8_t* bytes = row_bytes_.data() + i * row_stride_;
  for (Index k = 0; k < row_stride_; ++k) count += std::popcount(bytes[k]);
  return count;
}

std::uint64_t BitMatrix::total_count() const {
  std::uint64_t count = 0;
  for (std::uint8_t b : row_bytes_) count += static_cast<std::uint64_t>(std::popcount(b));
  return count;
}

VectorXd BitMatrix::multiply(const VectorXd& x) const {
  require(x.size() == cols_, ErrorCode::ShapeError, "A x: vector length != cols");
  VectorXd out = VectorXd::Zero(rows_);
  table_product(row_bytes_, row_stride_, x, out);
  return out;
}

VectorXd BitMatrix::multiply_transpose(const VectorXd& r) const {
  require(r.size() == rows_, ErrorCode::ShapeError, "A^T r: vector length != rows");
  VectorXd out = VectorXd::Zero(cols_);
  table_product(col_bytes_, col_stride_, r, out);
  return out;
}

// ---------------------------------------------------------------------------------------------
// PatternSet

PatternSet PatternSet::from_entries(PatternKind kind, Index resolution, const GridXd& entries,
                                    std::uint64_t seed) {
  require(resolution >= 1, ErrorCode::InvalidArgument, "resolution must be >= 1");
  require(entries.rows() >= 1 && entries.cols() == resolution * resolution, ErrorCode::ShapeError,
          "pattern entries must be M x R^2");
  PatternSet set;
  set.kind_ = kind;
  set.num_patterns_ = entries.rows();
  set.resolution_ = resolution;
  set.seed_ = seed;
  if (kind == PatternKind::gaussian) {
    require(entries.allFinite(), ErrorCode::InvalidArgument, "gaussian entries must be finite");
    set.entries_ = entries;
    return set;
  }
  const double one = 1.0;
  const double zero = kind == PatternKind::bernoulli01 ? 0.0 : -1.0;
  const Index n = entries.cols();
  const Index stride = bytes_for(n);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(entries.rows() * stride), 0);
  for (Index i = 0; i < entries.rows(); ++i) {
    for (Index j = 0; j < n; ++j) {
      const double e = entries(i, j);
      require(e == one || e == zero, ErrorCode::InvalidArgument,
              std::string("entry outside the ") + std::string(to_string(kind)) + " alphabet");
      if (e == one) bytes[static_cast<std::size_t>(i * stride + j / 8)] |= static_cast<std::uint8_t>(1u << (j % 8));
    }
  }
  set.entries_ = BitMatrix(entries.rows(), n, std::move(bytes));
  return set;
}

double PatternSet::entry(Index i, Index j) const {
  if (const GridXd* d = dense()) return (*d)(i, j);
  const bool bit = bits()->coeff(i, j);
  if (kind_ == PatternKind::bernoulli01) return bit ? 1.0 : 0.0;
  return bit ? 1.0 : -1.0;
}

VectorXd PatternSet::row(Index i) const { return rows(i, 1).row(0).transpose(); }

GridXd PatternSet::rows(Index first, Index count) const {
  require(first >= 0 && count >= 0 && first + count <= num_patterns_, ErrorCode::InvalidArgument,
          "pattern rows out of range");
  if (const GridXd* d = dense()) return d->middleRows(first, count);
  const double zero = kind_ == PatternKind::bernoulli01 ? 0.0 : -1.0;
  const Index n = num_pixels();
  GridXd out(count, n);
  const double values[2] = {zero, 1.0};
  for (Index i = 0; i < count; ++i) {
    for (Index j = 0; j < n; ++j) out(i, j) = values[bits()->coeff(first + i, j)];
  }
  return out;
}

PatternSet generate_patterns(PatternKind kind, Index num_patterns, Index resolution, std::uint64_t seed) {
  require(num_patterns >= 1, ErrorCode::InvalidArgument, "need at least one pattern");
  require(resolution >= 2, ErrorCode::InvalidArgument, "pattern resolution must be >= 2");
  const Index n = resolution * resolution;
  const std::uint64_t total = checked_entries(num_patterns, n);
  const std::uint64_t limit = kind == PatternKind::gaussian ? kMaxDenseEntries : kMaxBinaryEntries;
  if (total > limit) {
    throw Error(ErrorCode::TooLarge, std::to_string(total) + " entries exceed the limit of " +
                                         std::to_string(limit) + " for " + std::string(to_string(kind)));
  }

  PatternSet set;
  set.kind_ = kind;
  set.num_patterns_ = num_patterns;
  set.resolution_ = resolution;
  set.seed_ = seed;
  RandomStream rng(seed);

  if (kind == PatternKind::gaussian) {
    GridXd entries(num_patterns, n);
    const double scale = std::sqrt(static_cast<double>(num_patterns));
    for (Index k = 0; k < entries.size(); ++k) {
      const double u1 = rng.uniform_positive();
      const double u2 = rng.uniform();
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      entries.data()[k] = std::round(z * 1e6) / 1e6 / scale;
    }
    set.entries_ = std::move(entries);
    return set;
  }

  const Index stride = bytes_for(n);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(num_patterns * stride), 0);
  for (Index i = 0; i < num_patterns; ++i) {
    std::uint8_t* row = bytes.data() + i * stride;
    for (Index j = 0; j < n; ++j) row[j / 8] |= static_cast<std::uint8_t>((rng.next_u64() >> 63) << (j % 8));
  }
  set.entries_ = BitMatrix(num_patterns, n, std::move(bytes));
  return set;
}

double open_fraction(const PatternSet& patterns, Index row) {
  if (patterns.kind() != PatternKind::bernoulli01) {
    throw Error(ErrorCode::WrongPatternKind,
                "open_fraction needs 0/1 DMD patterns, got " + std::string(to_string(patterns.kind())));
  }
  require(row >= 0 && row < patterns.num_patterns(), ErrorCode::InvalidArgument, "pattern index out of range");
  return static_cast<double>(patterns.bits()->row_count(row)) / static_cast<double>(patterns.num_pixels());
}

double effective_open_fraction(const PatternSet& patterns, Index row) {
  switch (patterns.kind()) {
    case PatternKind::bernoulli01: return open_fraction(patterns, row);
    case PatternKind::bernoulli_pm1: return 1.0;
    case PatternKind::gaussian: return patterns.dense()->row(row).cwiseAbs().mean();
  }
  return 1.0;
}

// ---------------------------------------------------------------------------------------------
// MeasurementMatrix

VectorXd MeasurementMatrix::apply(const VectorXd& x) const {
  require(x.size() == cols(), ErrorCode::ShapeError, "A x: vector length != N");
  const PatternSet& p = *patterns_;
  if (const GridXd* d = p.dense()) {
    VectorXd out(rows());
    for (Index i = 0; i < rows(); ++i) {
      double s = 0.0;
      for (Index j = 0; j < cols(); ++j) s += (*d)(i, j) * x[j];
      out[i] = s;
    }
    return out;
  }
  VectorXd bx = p.bits()->multiply(x);
  if (p.kind() == PatternKind::bernoulli01) return bx;
  return (2.0 * bx).array() - x.sum();
}

VectorXd MeasurementMatrix::apply_adjoint(const VectorXd& r) const {
  require(r.size() == rows(), ErrorCode::ShapeError, "A^T r: vector length != M");
  const PatternSet& p = *patterns_;
  if (const GridXd* d = p.dense()) {
    VectorXd out = VectorXd::Zero(cols());
    for (Index i = 0; i < rows(); ++i) {
      for (Index j = 0; j < cols(); ++j) out[j] += (*d)(i, j) * r[i];
    }
    return out;
  }
  VectorXd bt = p.bits()->multiply_transpose(r);
  if (p.kind() == PatternKind::bernoulli01) return bt;
  return (2.0 * bt).array() - r.sum();
}

GridXd MeasurementMatrix::to_dense() const {
  if (const GridXd* d = patterns_->dense()) return *d;
  GridXd out(rows(), cols());
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j) out(i, j) = coeff(i, j);
  return out;
}

// ---------------------------------------------------------------------------------------------
// AGPM dump

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
  return v;
}

}  // namespace

void write_patterns(const PatternSet& patterns, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  std::string header = "AGPM";
  header.push_back(static_cast<char>(patterns.kind()));
  put_u32(header, static_cast<std::uint32_t>(patterns.num_patterns()));
  put_u32(header, static_cast<std::uint32_t>(patterns.resolution()));
  f.write(header.data(), static_cast<std::streamsize>(header.size()));

  const Index m = patterns.num_patterns();
  const Index n = patterns.num_pixels();
  std::string row;
  for (Index i = 0; i < m; ++i) {
    row.clear();
    if (const BitMatrix* bits = patterns.bits()) {
      for (Index j = 0; j < n; ++j) row.push_back(bits->coeff(i, j) ? 1 : 0);
    } else {
      for (Index j = 0; j < n; ++j) {
        const auto v = std::bit_cast<std::uint32_t>(static_cast<float>((*patterns.dense())(i, j)));
        put_u32(row, v);
      }
    }
    f.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

PatternSet read_patterns(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::string bytes(std::istreambuf_iterator<char>(f), {});
  if (bytes.size() < 13 || bytes.compare(0, 4, "AGPM") != 0) {
    throw Error(ErrorCode::ParseError, "not an AGPM pattern file");
  }
  const auto kind_byte = static_cast<unsigned char>(bytes[4]);
  if (kind_byte > 2) throw Error(ErrorCode::ParseError, "unknown AGPM kind byte");
  const auto kind = static_cast<PatternKind>(kind_byte);
  const Index m = get_u32(bytes, 5);
  const Index r = get_u32(bytes, 9);
  const Index n = r * r;
  const std::size_t width = kind == PatternKind::gaussian ? 4 : 1;
  if (bytes.size() != 13 + static_cast<std::size_t>(m * n) * width) {
    throw Error(ErrorCode::TruncatedFile, "AGPM payload size does not match header");
  }
  GridXd entries(m, n);
  for (Index k = 0; k < m * n; ++k) {
    const std::size_t at = 13 + static_cast<std::size_t>(k) * width;
    if (kind == PatternKind::gaussian) {
      entries.data()[k] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, at)));
    } else {
      const bool open = bytes[at] != 0;
      entries.data()[k] = open ? 1.0 : (kind == PatternKind::bernoulli01 ? 0.0 : -1.0);
    }
  }
  return PatternSet::from_entries(kind, r, entries);
}

}  // namespace aquaghost
