#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "pidrme/adam.hpp"
#include "pidrme/checkpoint.hpp"
#include "pidrme/gradcheck_suite.hpp"
#include "pidrme/network.hpp"

using namespace pidrme;

namespace {

Tensor<double> random_tensor(std::mt19937_64& rng, Index c, Index h, Index w) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<double> t(c, h, w);
  for (Index i = 0; i < t.size(); ++i) t.data().data()[i] = n(rng);
  return t;
}

ConvParams<double> random_conv(std::mt19937_64& rng, Index in, Index out) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto p = ConvParams<double>::zeros(in, out);
  for (Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = n(rng);
  for (Index i = 0; i < p.bias.size(); ++i) p.bias[i] = n(rng);
  return p;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pidrme_test_" + name);
}

}  // namespace

TEST_CASE("conv forward matches the direct oracle") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<Index> ch(1, 4), ext(1, 9);
  for (int i = 0; i < 30; ++i) {
    const Index in = ch(rng), out = ch(rng), h = ext(rng), w = ext(rng);
    const Index stride = i % 2 == 0 ? 1 : 2;
    const auto x = random_tensor(rng, in, h, w);
    const auto p = random_conv(rng, in, out);
    const auto y = layer_forward(LayerSpec::conv(in, out, stride), &p, x).first;
    const auto ref = oracle::conv(x, p, stride);
    REQUIRE(y.same_shape(ref));
    CHECK((y.data() - ref.data()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("conv output extents") {
  CHECK(detail::conv_out_extent(64, 1) == 64);
  CHECK(detail::conv_out_extent(64, 2) == 32);
  CHECK(detail::conv_out_extent(7, 2) == 4);
  CHECK_THROWS_AS(LayerSpec::conv(0, 1), ShapeError);
  CHECK_THROWS_AS(LayerSpec::conv(1, 1, 3), ShapeError);
  std::mt19937_64 rng(22);
  const auto p = random_conv(rng, 2, 3);
  CHECK_THROWS_AS(layer_forward(LayerSpec::conv(2, 3), &p, random_tensor(rng, 1, 4, 4)), ShapeError);
  CHECK_THROWS_AS(layer_forward<double>(LayerSpec::conv(2, 3), nullptr, random_tensor(rng, 2, 4, 4)), ShapeError);
}

TEST_CASE("im2col and col2im are adjoint") {
  std::mt19937_64 rng(23);
  for (Index stride : {1, 2}) {
    const auto x = random_tensor(rng, 3, 5, 6);
    const auto cols = detail::im2col(x, stride);
    Tensor<double>::Matrix u = Tensor<double>::Matrix::Random(cols.rows(), cols.cols());
    const double lhs = (cols.array() * u.array()).sum();
    const auto back = detail::col2im<double>(u, 3, 5, 6, stride);
    const double rhs = (x.data().array() * back.data().array()).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("pointwise layers") {
  Tensor<double> x(1, 2, 2);
  x.data() << -2.0, -0.0, 0.5, 3.0;
  const auto leaky = layer_forward<double>(LayerSpec::leaky_relu(0.2), nullptr, x).first;
  CHECK(leaky(0, 0, 0) == -0.4);
  CHECK(leaky(0, 0, 1) == 0.0);
  CHECK(leaky(0, 1, 0) == 0.5);
  CHECK(leaky(0, 1, 1) == 3.0);

  const auto sig = layer_forward<double>(LayerSpec::sigmoid(), nullptr, x).first;
  CHECK(sig(0, 0, 1) == 0.5);
  CHECK(sig(0, 1, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))).epsilon(1e-15));
  CHECK((sig.data().array() > 0).all());
  CHECK((sig.data().array() < 1).all());

  const auto up = layer_forward<double>(LayerSpec::upsample(), nullptr, x).first;
  REQUIRE(up.height() == 4);
  REQUIRE(up.width() == 4);
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c) CHECK(up(0, r, c) == x(0, r / 2, c / 2));
}

TEST_CASE("upsample backward sums each 2x2 block") {
  Tensor<double> x(1, 1, 2);
  auto [y, cache] = layer_forward<double>(LayerSpec::upsample(), nullptr, x);
  Tensor<double> g(1, 2, 4);
  g.data() << 1, 2, 3, 4, 5, 6, 7, 8;
  const auto gx = layer_backward<double>(LayerSpec::upsample(), nullptr, cache, g, nullptr);
  CHECK(gx(0, 0, 0) == 1 + 2 + 5 + 6);
  CHECK(gx(0, 0, 1) == 3 + 4 + 7 + 8);
}

TEST_CASE("concat and split round-trip") {
  std::mt19937_64 rng(24);
  const auto a = random_tensor(rng, 2, 3, 4);
  const auto b = random_tensor(rng, 3, 3, 4);
  const auto ab = concat_channels(a, b);
  CHECK(ab.channels() == 5);
  CHECK(ab(2, 1, 1) == b(0, 1, 1));
  const auto [a2, b2] = split_channels(ab, 2);
  CHECK(a2 == a);
  CHECK(b2 == b);
  CHECK_THROWS_AS(concat_channels(a, random_tensor(rng, 1, 4, 4)), ShapeError);
  CHECK_THROWS_AS(split_channels(ab, 6), ShapeError);
}

TEST_CASE("kaiming uniform bounds and zero biases") {
  std::mt19937_64 rng(25);
  const auto spec = LayerSpec::conv(4, 8);
  const auto p = kaiming_uniform<double>(spec, rng);
  const double bound = std::sqrt(2.0 / 1.04) * std::sqrt(3.0 / 36.0);
  CHECK(p.weight.cwiseAbs().maxCoeff() <= bound);
  CHECK(p.weight.cwiseAbs().maxCoeff() > 0.5 * bound);
  CHECK(p.bias.isZero(0.0));
}

TEST_CASE("parameter tree arithmetic") {
  std::mt19937_64 rng(26);
  ParamTree<double> a, b;
  a.convs = {random_conv(rng, 1, 2), random_conv(rng, 2, 1)};
  b.convs = {random_conv(rng, 1, 2), random_conv(rng, 2, 1)};
  CHECK(a.size() == (18 + 2) + (18 + 1));
  auto c = a;
  c += b;
  c *= 0.5;
  CHECK((c.flatten() - 0.5 * (a.flatten() + b.flatten())).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(l2_distance(a, b) == doctest::Approx((a.flatten() - b.flatten()).norm()).epsilon(1e-14));
  auto d = a.zeros_like();
  d.assign(a.flatten());
  CHECK(d == a);
  CHECK_THROWS_AS(d.assign(Eigen::VectorXd::Zero(3)), ShapeError);
  ParamTree<double> other;
  other.convs = {random_conv(rng, 1, 3)};
  CHECK_THROWS_AS(a += other, ShapeError);
}

TEST_CASE("adam matches hand-computed steps") {
  ParamTree<double> p;
  p.convs.push_back({ConvParams<double>::Matrix::Zero(1, 0), Eigen::VectorXd::Constant(1, 1.0)});
  ParamTree<double> g = p;
  g.convs[0].bias[0] = 0.5;
  auto state = AdamState<double>::for_params(p, 0.1);
  adam_step(p, g, state);
  CHECK(p.convs[0].bias[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));

  g.convs[0].bias[0] = -1.0;
  adam_step(p, g, state);
  const double m = 0.9 * 0.05 + 0.1 * -1.0;
  const double v = 0.999 * 0.00025 + 0.001 * 1.0;
  const double mhat = m / (1 - 0.81);
  const double vhat = v / (1 - 0.999 * 0.999);
  const double expected = (1.0 - 0.1 * 0.5 / (0.5 + 1e-8)) - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(p.convs[0].bias[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(state.step == 2);
}

TEST_CASE("adam with zero learning rate leaves parameters unchanged") {
  std::mt19937_64 rng(27);
  ParamTree<double> p, g;
  p.convs = {random_conv(rng, 2, 3)};
  g.convs = {random_conv(rng, 2, 3)};
  const auto before = p;
  auto state = AdamState<double>::for_params(p, 0.0);
  for (int i = 0; i < 5; ++i) adam_step(p, g, state);
  CHECK(p == before);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  std::mt19937_64 rng(28);
  ParamTree<double> p;
  p.convs = {random_conv(rng, 2, 4), random_conv(rng, 4, 1)};
  CHECK(checkpoint_manifest(p) == "PIDRME-PARAMS 1 2 4x2x3x3 1x4x3x3");
  const auto path = temp_path("ckpt.bin");
  save_params(p, path);
  CHECK(std::filesystem::file_size(path) == checkpoint_manifest(p).size() + 1 + 8 * static_cast<std::size_t>(p.size()));
  CHECK(load_params(path) == p);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint errors") {
  std::mt19937_64 rng(29);
  ParamTree<double> p;
  p.convs = {random_conv(rng, 1, 2)};
  const auto path = temp_path("ckpt_bad.bin");
  auto write = [&](const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out << bytes;
  };

  CHECK_THROWS_AS(load_params(temp_path("does_not_exist.bin")), Error);
  write("");
  CHECK_THROWS_AS(load_params(path), ParseError);
  write("NOT-PARAMS 1 1 2x1x3x3\n");
  CHECK_THROWS_AS(load_params(path), ParseError);
  write("PIDRME-PARAMS 9 1 2x1x3x3\n");
  CHECK_THROWS_AS(load_params(path), ParseError);
  write("PIDRME-PARAMS 1 2 2x1x3x3\n");
  CHECK_THROWS_AS(load_params(path), ParseError);
  write("PIDRME-PARAMS 1 1 2x1x5x5\n");
  CHECK_THROWS_AS(load_params(path), ParseError);

  save_params(p, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(load_params(path), ParseError);
  save_params(p, path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << 'x';
  }
  CHECK_THROWS_AS(load_params(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("sequential backward matches layer-by-layer composition") {
  std::mt19937_64 rng(30);
  Sequential<double> net({LayerSpec::conv(1, 2, 2), LayerSpec::leaky_relu(), LayerSpec::upsample(), LayerSpec::conv(2, 1),
                          LayerSpec::sigmoid()});
  const auto params = net.init_params(5);
  const auto x = random_tensor(rng, 1, 6, 6);
  Sequential<double>::Trace trace;
  const auto y = net.forward(params, x, &trace);
  CHECK(y.same_shape(x));
  const auto acts = net.activations(params, x);
  CHECK(acts.back() == y);
  CHECK(net.conv_count() == 2);
  CHECK_THROWS_AS(net.forward(ParamTree<double>{}, x), ShapeError);
}

TEST_CASE("gradient check suite passes") {
  const GradCheckReport report = run_gradcheck_suite({});
  for (const auto& c : report.cases) {
    INFO(c.name);
    CHECK(c.result.max_rel_error < c.threshold);
    CHECK(c.result.checked > 0);
  }
  CHECK(report.passed());
}
