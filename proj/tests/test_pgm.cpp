#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "pidrme/error.hpp"
#include "pidrme/pgm.hpp"

using namespace pidrme;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("pidrme_pgm_" + name); }

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST_CASE("quantization endpoints") {
  CHECK(quantize_dbm(kFloorDbm) == 0);
  CHECK(quantize_dbm(kCeilDbm) == 255);
  CHECK(quantize_dbm(-500) == 0);
  CHECK(quantize_dbm(500) == 255);
  CHECK(dequantize_pixel(0) == kFloorDbm);
  CHECK(dequantize_pixel(255) == kCeilDbm);
}

TEST_CASE("export then import round-trips within half a quantization step") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-120.0, 23.0);
  Grid g(13, 17);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = u(rng);
  const auto path = temp_file("roundtrip.pgm");
  export_pgm(RadioMap(g), path);
  const RadioMap back = import_pgm(path);
  REQUIRE(back.height() == 13);
  REQUIRE(back.width() == 17);
  const double half_step = 143.0 / 255.0 / 2.0;
  CHECK((back.values - g).cwiseAbs().maxCoeff() <= half_step + 1e-12);
  fs::remove(path);
}

TEST_CASE("export is byte-deterministic") {
  Grid g = Grid::Constant(4, 5, -60.0);
  g(1, 2) = 10.0;
  const auto a = temp_file("a.pgm"), b = temp_file("b.pgm");
  export_pgm(RadioMap(g), a);
  export_pgm(RadioMap(g), b);
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);
  CHECK(sa.rfind("P5", 0) == 0);
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("ASCII P2 with comments") {
  const auto p = temp_file("ascii.pgm");
  write_bytes(p, "P2\n# a comment\n3 2\n255\n0 255 128\n# mid\n1 2 3\n");
  const RadioMap m = import_pgm(p);
  CHECK(m.width() == 3);
  CHECK(m.height() == 2);
  CHECK(m(0, 0) == kFloorDbm);
  CHECK(m(0, 1) == kCeilDbm);
  CHECK(m(1, 2) == doctest::Approx(dequantize_pixel(3)));
  fs::remove(p);
}

TEST_CASE("malformed files raise parse errors with offsets") {
  const auto p = temp_file("bad.pgm");
  write_bytes(p, "P6\n2 2\n255\n");
  CHECK_THROWS_AS(import_pgm(p), ParseError);
  write_bytes(p, "P2\n2 2\n65535\n0 0 0 0\n");
  try {
    import_pgm(p);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 7);
  }
  write_bytes(p, "P5\n2 2\n255\n\x01\x02");
  CHECK_THROWS_AS(import_pgm(p), ParseError);
  write_bytes(p, "P2\n2 2\n255\n0 1 x 3\n");
  CHECK_THROWS_AS(import_pgm(p), ParseError);
  fs::remove(p);
  CHECK_THROWS_AS(import_pgm(temp_file("missing.pgm")), Error);
}
