#include "pidrme/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pidrme/error.hpp"

namespace pidrme {

namespace {

class PgmReader {
 public:
  explicit PgmReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ >= bytes_.size(); }

  void skip_space_and_comments() {
    while (!at_end()) {
      if (bytes_[pos_] == '#') {
        while (!at_end() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_int(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long v = 0;
    while (!at_end() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) throw ParseError(std::string("pgm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError(std::string("pgm: expected ") + what + (at_end() ? ", got end of file" : ""), start);
    }
    return v;
  }

  unsigned char byte() {
    if (at_end()) throw ParseError("pgm: truncated payload", pos_);
    return bytes_[pos_++];
  }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint8_t quantize_dbm(double dbm, const PgmRange& range) {
  const double unit = std::clamp((dbm - range.floor_dbm) / (range.ceil_dbm - range.floor_dbm), 0.0, 1.0);
  return static_cast<std::uint8_t>(round_half_up(unit * 255.0));
}

double dequantize_pixel(int pixel, const PgmRange& range) {
  return range.floor_dbm + (static_cast<double>(pixel) / 255.0) * (range.ceil_dbm - range.floor_dbm);
}

RadioMap import_pgm(const std::filesystem::path& path, const PgmRange& range) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("pgm: cannot open " + path.string());
  PgmReader rd(std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {}));

  const unsigned char p = rd.byte();
  const std::size_t kind_at = rd.offset();
  const unsigned char kind = rd.byte();
  if (p != 'P' || (kind != '2' && kind != '5')) throw ParseError("pgm: bad magic number (want P2 or P5)", kind_at - 1);

  const long width = rd.read_int("width");
  const long height = rd.read_int("height");
  rd.skip_space_and_comments();
  const std::size_t maxval_at = rd.offset();
  const long maxval = rd.read_int("maxval");
  if (maxval != 255) throw ParseError("pgm: maxval must be 255, got " + std::to_string(maxval), maxval_at);
  if (width < 1 || height < 1) throw ParseError("pgm: empty image", maxval_at);

  Grid values(height, width);
  if (kind == '5') {
    const unsigned char sep = rd.byte();
    if (!std::isspace(sep)) throw ParseError("pgm: expected whitespace before payload", rd.offset() - 1);
    for (long r = 0; r < height; ++r) {
      for (long c = 0; c < width; ++c) values(r, c) = dequantize_pixel(rd.byte(), range);
    }
  } else {
    for (long r = 0; r < height; ++r) {
      for (long c = 0; c < width; ++c) {
        rd.skip_space_and_comments();
        const std::size_t at = rd.offset();
        const long v = rd.read_int("pixel");
        if (v > 255) throw ParseError("pgm: pixel exceeds maxval", at);
        values(r, c) = dequantize_pixel(static_cast<int>(v), range);
      }
    }
  }
  return RadioMap(std::move(values));
}

void export_pgm(const RadioMap& map, const std::filesystem::path& path, const PgmRange& range) {
  map.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("pgm: cannot write " + path.string());
  out << "P5\n" << map.width() << ' ' << map.height() << "\n255\n";
  for (Index r = 0; r < map.height(); ++r) {
    for (Index c = 0; c < map.width(); ++c) out.put(static_cast<char>(quantize_dbm(map(r, c), range)));
  }
  if (!out) throw Error("pgm: write failed for " + path.string());
}

}  // namespace pidrme
