#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "aquaghost/dct.hpp"
#include "aquaghost/errors.hpp"
#include "aquaghost/scene.hpp"
#include "oracles.hpp"

using namespace aquaghost;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "aquaghost-tests";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_text(const std::string& name, const std::string& text) {
  const fs::path p = temp_file(name);
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an aquaghost::Error");
  return ErrorCode::SpecError;
}

}  // namespace

TEST_CASE("load_pgm reads ASCII graymaps") {
  SceneImage one = load_pgm(write_text("one.pgm", "P2\n1 1\n255\n255\n"));
  CHECK(one.width() == 1);
  CHECK(one.height() == 1);
  CHECK(one(0, 0) == 1.0);

  SceneImage two = load_pgm(write_text("two.pgm", "P2\n# a comment\n2 1\n255\n0 255\n"));
  CHECK(two.width() == 2);
  CHECK(two(0, 0) == 0.0);
  CHECK(two(0, 1) == 1.0);
}

TEST_CASE("load_pgm reads 16-bit binary graymaps") {
  std::string data = "P5\n2 1\n65535\n";
  data += std::string("\x00\x00\xff\xff", 4);
  SceneImage img = load_pgm(write_text("wide.pgm", data));
  CHECK(img(0, 0) == 0.0);
  CHECK(img(0, 1) == 1.0);
}

TEST_CASE("load_pgm errors") {
  CHECK(code_of([] { load_pgm(write_text("bad.pgm", "P7\n1 1\n255\n0\n")); }) == ErrorCode::ParseError);
  CHECK(code_of([] { load_pgm(write_text("maxval.pgm", "P2\n1 1\n70000\n0\n")); }) == ErrorCode::ParseError);
  CHECK(code_of([] { load_pgm(write_text("short.pgm", "P2\n2 2\n255\n0 1 2\n")); }) == ErrorCode::TruncatedFile);
  CHECK(code_of([] { load_pgm(write_text("short5.pgm", std::string("P5\n2 2\n255\n\x01\x02", 13))); }) ==
        ErrorCode::TruncatedFile);
  CHECK(code_of([] { load_pgm(temp_file("does-not-exist.pgm")); }) == ErrorCode::IoError);
}

TEST_CASE("save_pgm rounds half up") {
  const fs::path p = temp_file("half.pgm");
  save_pgm(SceneImage(1, 1, 0.5), p, 255);
  std::ifstream f(p, std::ios::binary);
  const std::string content((std::istreambuf_iterator<char>(f)), {});
  CHECK(content == std::string("P5\n1 1\n255\n") + char(128));

  save_pgm(SceneImage(1, 1, 0.0), p, 255);
  CHECK(load_pgm(p)(0, 0) == 0.0);
}

TEST_CASE("save_pgm round trip") {
  GridXd px(16, 16);
  std::uint64_t s = 12345;
  for (Index k = 0; k < px.size(); ++k) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    px.data()[k] = static_cast<double>(s >> 11) * 0x1.0p-53;
  }
  const SceneImage img(px);
  const fs::path p8 = temp_file("rt8.pgm");
  save_pgm(img, p8, 255);
  CHECK((load_pgm(p8).pixels() - px).cwiseAbs().maxCoeff() <= 1.0 / 510.0 + 1e-15);

  // Values already on the 16-bit grid survive exactly.
  const GridXd q = (px * 65535.0).array().round() / 65535.0;
  const fs::path p16 = temp_file("rt16.pgm");
  save_pgm(SceneImage(q), p16, 65535);
  CHECK(load_pgm(p16).pixels() == q);

  CHECK(code_of([&] { save_pgm(img, temp_file("no-such-dir") / "x" / "y.pgm"); }) == ErrorCode::IoError);
}

TEST_CASE("SceneImage rejects values outside [0, 1]") {
  GridXd px = GridXd::Zero(2, 2);
  px(1, 1) = 1.5;
  CHECK(code_of([&] { SceneImage{px}; }) == ErrorCode::InvalidArgument);
  px(1, 1) = std::nan("");
  CHECK(code_of([&] { SceneImage{px}; }) == ErrorCode::InvalidArgument);
}

TEST_CASE("shipped card asset matches its histogram digest") {
  const SceneImage card = load_pgm(fs::path(AQUAGHOST_SOURCE_DIR) / "assets" / "card_80.pgm");
  REQUIRE(card.width() == 80);
  REQUIRE(card.height() == 80);
  std::uint64_t hist[256] = {};
  for (Index k = 0; k < card.size(); ++k) ++hist[static_cast<int>(std::lround(card.pixels().data()[k] * 255.0))];
  // FNV-1a over the 256 bin counts, each as 8 little-endian bytes.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint64_t c : hist)
    for (int b = 0; b < 8; ++b) {
      h ^= (c >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  CHECK(h == 0xcc9f1e5b95dc5995ULL);
  CHECK(hist[255] == 1096);
  CHECK(hist[0] == 6400 - 1096);

  // The asset is the card generator's output.
  CHECK(card == make_synthetic(SyntheticKind::card, 80, 0, 0));
}

TEST_CASE("make_synthetic sparse_dct") {
  const SceneImage flat = make_synthetic(SyntheticKind::sparse_dct, 8, 1, 0);
  CHECK((flat.pixels().array() == flat(0, 0)).all());

  const SceneImage four = make_synthetic(SyntheticKind::sparse_dct, 8, 4, 7);
  const oracle::Matrix c = oracle::dct2(four.pixels());
  int nonzero = 0;
  for (Index k = 0; k < c.size(); ++k) nonzero += std::abs(c.data()[k]) > 1e-9;
  CHECK(nonzero == 4);
  CHECK(count_dct_nonzeros(four) == 4);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (Index k : {2, 5, 10}) {
      const SceneImage s = make_synthetic(SyntheticKind::sparse_dct, 16, k, seed);
      CHECK(count_dct_nonzeros(s) == k);
      CHECK(s == make_synthetic(SyntheticKind::sparse_dct, 16, k, seed));
    }
  }
  CHECK(code_of([] { make_synthetic(SyntheticKind::sparse_dct, 4, 17, 0); }) == ErrorCode::InvalidSparsity);
  CHECK(code_of([] { make_synthetic(SyntheticKind::sparse_dct, 4, 0, 0); }) == ErrorCode::InvalidSparsity);
}

TEST_CASE("make_synthetic disk and card") {
  const SceneImage disk = make_synthetic(SyntheticKind::disk, 4, 0, 0);
  GridXd expect = GridXd::Zero(4, 4);
  expect.block(1, 1, 2, 2).setOnes();
  CHECK(disk.pixels() == expect);

  const SceneImage card = make_synthetic(SyntheticKind::card, 180, 0, 3);
  CHECK(((card.pixels().array() == 0.0) || (card.pixels().array() == 1.0)).all());
  CHECK(card.pixels().sum() > 0.0);
  CHECK(card == make_synthetic(SyntheticKind::card, 180, 0, 99));
}

TEST_CASE("resample_nearest") {
  GridXd src(2, 2);
  src << 0, 1, 1, 0;
  const SceneImage up = resample_nearest(SceneImage(src), 4);
  GridXd expect(4, 4);
  expect << 0, 0, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0, 1, 1, 0, 0;
  CHECK(up.pixels() == expect);
  CHECK(resample_nearest(SceneImage(src), 2) == SceneImage(src));
  CHECK(resample_nearest(up, 2) == SceneImage(src));

  // Downsampling then mean-pooling back up loses detail.
  const SceneImage big = make_synthetic(SyntheticKind::card, 180, 0, 0);
  const SceneImage small = resample_nearest(big, 80);
  const SceneImage back = resample_nearest(small, 180);
  CHECK((back.pixels() - big.pixels()).norm() > 0.0);
}
