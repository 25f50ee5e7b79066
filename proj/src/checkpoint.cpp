#include "pidrme/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "pidrme/error.hpp"

namespace pidrme {

namespace {

constexpr const char* kMagic = "PIDRME-PARAMS";
constexpr int kVersion = 1;

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double get_f64(std::istream& in, std::size_t& offset) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError("checkpoint: truncated payload", offset);
  offset += 8;
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string checkpoint_manifest(const ParamTree<double>& params) {
  std::ostringstream s;
  s << kMagic << ' ' << kVersion << ' ' << params.convs.size();
  for (const auto& c : params.convs) s << ' ' << c.out_channels() << 'x' << c.in_channels() << "x3x3";
  return s.str();
}

void save_params(const ParamTree<double>& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot write " + path.string());
  out << checkpoint_manifest(params) << '\n';
  for (const auto& c : params.convs) {
    for (Index i = 0; i < c.weight.size(); ++i) put_f64(out, c.weight.data()[i]);
    for (Index i = 0; i < c.bias.size(); ++i) put_f64(out, c.bias(i));
  }
  if (!out) throw Error("checkpoint: write failed for " + path.string());
}

ParamTree<double> load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint: missing manifest line", 0);
  std::size_t offset = line.size() + 1;

  std::istringstream manifest(line);
  std::string magic;
  int version = 0;
  std::size_t blocks = 0;
  if (!(manifest >> magic >> version >> blocks) || magic != kMagic) {
    throw ParseError("checkpoint: bad manifest header", 0);
  }
  if (version != kVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version), 0);

  ParamTree<double> params;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::string shape;
    if (!(manifest >> shape)) throw ParseError("checkpoint: manifest lists fewer blocks than declared", 0);
    long out_ch = 0;
    long in_ch = 0;
    long kh = 0;
    long kw = 0;
    char x1 = 0;
    char x2 = 0;
    char x3 = 0;
    std::istringstream dims(shape);
    if (!(dims >> out_ch >> x1 >> in_ch >> x2 >> kh >> x3 >> kw) || x1 != 'x' || x2 != 'x' || x3 != 'x' || kh != 3 ||
        kw != 3 || out_ch < 1 || in_ch < 1) {
      throw ParseError("checkpoint: bad block shape '" + shape + "'", 0);
    }
    params.convs.push_back(ConvParams<double>::zeros(in_ch, out_ch));
  }
  for (auto& c : params.convs) {
    for (Index i = 0; i < c.weight.size(); ++i) c.weight.data()[i] = get_f64(in, offset);
    for (Index i = 0; i < c.bias.size(); ++i) c.bias(i) = get_f64(in, offset);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("checkpoint: trailing bytes after payload", offset);
  return params;
}

}  // namespace pidrme
