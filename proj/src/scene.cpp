#include "aquaghost/scene.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

#include "aquaghost/dct.hpp"
#include "aquaghost/errors.hpp"
#include "aquaghost/random.hpp"

namespace aquaghost {

SceneImage::SceneImage(GridXd pixels) : pixels_(std::move(pixels)) {
  require(pixels_.rows() >= 1 && pixels_.cols() >= 1, ErrorCode::InvalidArgument,
          "scene must be at least 1x1");
  for (Index k = 0; k < pixels_.size(); ++k) {
    const double p = pixels_.data()[k];
    require(p >= 0.0 && p <= 1.0, ErrorCode::InvalidArgument,
            "scene pixel outside [0, 1] at offset " + std::to_string(k));
  }
}

SceneImage::SceneImage(Index width, Index height, double fill)
    : SceneImage(GridXd::Constant(height, width, fill)) {}

namespace {

class PgmReader {
 public:
  explicit PgmReader(std::string bytes) : bytes_(std::move(bytes)) {}

  // Header token; '#' starts a comment running to end of line.
  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])) &&
           bytes_[pos_] != '#') {
      out.push_back(bytes_[pos_++]);
    }
    if (out.empty()) throw Error(ErrorCode::ParseError, "unexpected end of PGM header");
    return out;
  }

  long header_int(const char* what) {
    const std::string t = token();
    for (char ch : t) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) {
        throw Error(ErrorCode::ParseError, std::string("non-numeric PGM ") + what + ": '" + t + "'");
      }
    }
    if (t.size() > 9) throw Error(ErrorCode::ParseError, std::string("PGM ") + what + " too large");
    return std::stol(t);
  }

  // Exactly one whitespace byte separates maxval from P5 raster data.
  void consume_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw Error(ErrorCode::ParseError, "missing whitespace after PGM maxval");
    }
    ++pos_;
  }

  // ASCII raster sample, or -1 at end of data. Comments are not allowed in the raster.
  long ascii_sample() {
    while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (pos_ >= bytes_.size()) return -1;
    std::string t;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      t.push_back(bytes_[pos_++]);
    }
    for (char ch : t) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) {
        throw Error(ErrorCode::ParseError, "non-numeric PGM sample '" + t + "'");
      }
    }
    if (t.size() > 6) throw Error(ErrorCode::ParseError, "PGM sample too large");
    return std::stol(t);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  unsigned char byte() { return static_cast<unsigned char>(bytes_[pos_++]); }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

bool in_triangle(double u, double v, double ax, double ay, double bx, double by, double cx,
                 double cy) {
  const auto side = [&](double px, double py, double qx, double qy) {
    return (qx - px) * (v - py) - (qy - py) * (u - px);
  };
  const double d1 = side(ax, ay, bx, by);
  const double d2 = side(bx, by, cx, cy);
  const double d3 = side(cx, cy, ax, ay);
  const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
  const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(has_neg && has_pos);
}

// Fish silhouette on the unit square; u runs along columns, v along rows.
bool card_inside(double u, double v) {
  const double eu = (u - 0.47) / 0.30;
  const double ev = (v - 0.55) / 0.12;
  if (eu * eu + ev * ev <= 1.0) return true;
  if (in_triangle(u, v, 0.38, 0.46, 0.56, 0.46, 0.50, 0.24)) return true;   // dorsal fin
  if (in_triangle(u, v, 0.72, 0.55, 0.93, 0.33, 0.90, 0.75)) return true;   // tail
  if (in_triangle(u, v, 0.40, 0.62, 0.52, 0.62, 0.44, 0.78)) return true;   // pectoral fin
  return false;
}

SceneImage make_sparse_dct(Index r, Index k, std::uint64_t seed) {
  const Index n = r * r;
  const Dct2<double> dct(r, r);
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    RandomStream rng(derive_seed(seed, attempt));
    GridXd coeffs = GridXd::Zero(r, r);
    coeffs(0, 0) = 0.5 * static_cast<double>(r);

    // Partial Fisher-Yates over the non-DC positions 1..n-1.
    std::vector<Index> positions(static_cast<std::size_t>(n - 1));
    std::iota(positions.begin(), positions.end(), Index{1});
    const double scale =
        k > 1 ? 0.25 * static_cast<double>(r) / std::sqrt(static_cast<double>(k - 1)) : 0.0;
    for (Index t = 0; t + 1 < k; ++t) {
      const auto pick = t + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - 1 - t)));
      std::swap(positions[static_cast<std::size_t>(t)], positions[static_cast<std::size_t>(pick)]);
      const Index pos = positions[static_cast<std::size_t>(t)];
      const double magnitude = scale * (0.5 + 0.5 * rng.uniform());
      const double sign = (rng.next_u64() >> 63) ? -1.0 : 1.0;
      coeffs.data()[pos] = sign * magnitude;
    }

    const GridXd image = dct.inverse(coeffs);
    if ((image.array() < 0.0).any() || (image.array() > 1.0).any()) continue;
    SceneImage scene(image);
    if (count_dct_nonzeros(scene) == k) return scene;
  }
  throw Error(ErrorCode::InvalidSparsity,
              "could not synthesize an in-range " + std::to_string(k) + "-sparse scene in 100 attempts");
}

}  // namespace

SceneImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  PgmReader reader(std::string(std::istreambuf_iterator<char>(in), {}));

  const std::string magic = reader.token();
  if (magic != "P2" && magic != "P5") throw Error(ErrorCode::ParseError, "bad PGM magic '" + magic + "'");
  const long width = reader.header_int("width");
  const long height = reader.header_int("height");
  const long maxval = reader.header_int("maxval");
  if (width < 1 || height < 1) throw Error(ErrorCode::ParseError, "PGM dimensions must be positive");
  if (maxval < 1 || maxval > 65535) throw Error(ErrorCode::ParseError, "PGM maxval out of range");

  const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  GridXd pixels(height, width);
  const double scale = static_cast<double>(maxval);
  const auto store = [&](std::size_t k, long sample) {
    if (sample > maxval) throw Error(ErrorCode::ParseError, "PGM sample exceeds maxval");
    pixels.data()[k] = static_cast<double>(sample) / scale;
  };

  if (magic == "P2") {
    for (std::size_t k = 0; k < count; ++k) {
      const long s = reader.ascii_sample();
      if (s < 0) throw Error(ErrorCode::TruncatedFile, "P2 raster has fewer samples than width*height");
      store(k, s);
    }
    if (reader.ascii_sample() >= 0) {
      throw Error(ErrorCode::TruncatedFile, "P2 raster has more samples than width*height");
    }
  } else {
    reader.consume_single_space();
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    if (reader.remaining() != count * bytes_per) {
      throw Error(ErrorCode::TruncatedFile, "P5 raster size does not match width*height");
    }
    for (std::size_t k = 0; k < count; ++k) {
      long s = reader.byte();
      if (bytes_per == 2) s = (s << 8) | reader.byte();
      store(k, s);
    }
  }
  return SceneImage(std::move(pixels));
}

void save_pgm(const SceneImage& image, const std::filesystem::path& path, int maxval) {
  require(maxval == 255 || maxval == 65535, ErrorCode::InvalidArgument, "maxval must be 255 or 65535");
  std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) +
                    "\n" + std::to_string(maxval) + "\n";
  const auto flat = image.flat();
  out.reserve(out.size() + static_cast<std::size_t>(flat.size()) * (maxval > 255 ? 2 : 1));
  for (Index k = 0; k < flat.size(); ++k) {
    const auto q = static_cast<unsigned>(std::floor(flat[k] * maxval + 0.5));
    if (maxval > 255) out.push_back(static_cast<char>((q >> 8) & 0xff));
    out.push_back(static_cast<char>(q & 0xff));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  if (name == "sparse_dct") return SyntheticKind::sparse_dct;
  if (name == "card") return SyntheticKind::card;
  if (name == "disk") return SyntheticKind::disk;
  throw Error(ErrorCode::InvalidArgument, "unknown synthetic scene kind '" + std::string(name) + "'");
}

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::sparse_dct: return "sparse_dct";
    case SyntheticKind::card: return "card";
    case SyntheticKind::disk: return "disk";
  }
  return "?";
}

SceneImage make_synthetic(SyntheticKind kind, Index resolution, Index sparsity, std::uint64_t seed) {
  require(resolution >= 2, ErrorCode::InvalidArgument, "synthetic scenes need R >= 2");
  const Index r = resolution;
  switch (kind) {
    case SyntheticKind::sparse_dct:
      if (sparsity < 1 || sparsity > r * r) {
        throw Error(ErrorCode::InvalidSparsity,
                    "K = " + std::to_string(sparsity) + " outside [1, " + std::to_string(r * r) + "]");
      }
      return make_sparse_dct(r, sparsity, seed);
    case SyntheticKind::card: {
      GridXd g(r, r);
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j)
          g(i, j) = card_inside((j + 0.5) / r, (i + 0.5) / r) ? 1.0 : 0.0;
      return SceneImage(std::move(g));
    }
    case SyntheticKind::disk: {
      GridXd g(r, r);
      const double c = 0.5 * static_cast<double>(r - 1);
      const double radius = 0.25 * static_cast<double>(r);
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j)
          g(i, j) = (i - c) * (i - c) + (j - c) * (j - c) <= radius * radius ? 1.0 : 0.0;
      return SceneImage(std::move(g));
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown synthetic scene kind");
}

SceneImage resample_nearest(const SceneImage& image, Index resolution) {
  require(resolution >= 1, ErrorCode::InvalidArgument, "target resolution must be >= 1");
  const Index h = image.height();
  const Index w = image.width();
  GridXd out(resolution, resolution);
  for (Index i = 0; i < resolution; ++i)
    for (Index j = 0; j < resolution; ++j)
      out(i, j) = image(i * h / resolution, j * w / resolution);
  return SceneImage(std::move(out));
}

Index count_dct_nonzeros(const SceneImage& image, double tol) {
  return (dct2_forward(image.pixels()).array().abs() > tol).count();
}

}  // namespace aquaghost
