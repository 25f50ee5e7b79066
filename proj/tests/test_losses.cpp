#include <doctest.h>

#include <functional>
#include <random>

#include "oracles.hpp"
#include "pidrme/losses.hpp"
#include "pidrme/report.hpp"

using namespace pidrme;

namespace {

constexpr int kInstances = 50;

Grid random_instance(std::mt19937_64& rng, Index h, Index w, bool plateaus) {
  Grid g = oracle::random_grid(h, w, rng);
  if (plateaus) g = (g * 3.0).array().floor() / 3.0;
  return g;
}

ParamTree<double> random_tree(std::mt19937_64& rng, const std::vector<std::pair<Index, Index>>& shapes) {
  std::normal_distribution<double> n(0.0, 1.0);
  ParamTree<double> t;
  for (auto [in, out] : shapes) {
    auto p = ConvParams<double>::zeros(in, out);
    for (Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = n(rng);
    for (Index i = 0; i < p.bias.size(); ++i) p.bias[i] = n(rng);
    t.convs.push_back(p);
  }
  return t;
}

double grid_fd(const std::function<double(const Grid&)>& f, Grid x, Index r, Index c, double eps = 1e-6) {
  const double v = x(r, c);
  x(r, c) = v + eps;
  const double up = f(x);
  x(r, c) = v - eps;
  const double down = f(x);
  return (up - down) / (2 * eps);
}

}  // namespace

TEST_CASE("rmse matches the brute-force oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<Index> dim(1, 9);
  for (int i = 0; i < kInstances; ++i) {
    const Index h = dim(rng), w = dim(rng);
    const Grid a = oracle::random_grid(h, w, rng, -120, 23);
    const Grid b = oracle::random_grid(h, w, rng, -120, 23);
    CHECK(std::abs(rmse(a, b) - oracle::rmse(a, b)) <= 1e-12);
  }
  CHECK(rmse(Grid::Constant(3, 3, 1.0), Grid::Constant(3, 3, 1.0)) == 0.0);
  CHECK_THROWS_AS(rmse(Grid::Zero(2, 3), Grid::Zero(3, 2)), ShapeError);
}

TEST_CASE("loss_rec matches the brute-force oracle and its gradient") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<Index> dim(1, 9);
  for (int i = 0; i < kInstances; ++i) {
    const Index h = dim(rng), w = dim(rng);
    const Grid p = oracle::random_grid(h, w, rng);
    const Grid t = oracle::random_grid(h, w, rng);
    const LossGrad lg = loss_rec(p, t);
    CHECK(std::abs(lg.value - oracle::loss_rec(p, t)) <= 1e-12);
    const Index r = i % h, c = (i / 2) % w;
    const double fd = grid_fd([&](const Grid& x) { return oracle::loss_rec(x, t); }, p, r, c);
    CHECK(lg.grad(r, c) == doctest::Approx(fd).epsilon(1e-6));
  }
  const LossGrad zero = loss_rec(Grid::Constant(4, 4, 0.3), Grid::Constant(4, 4, 0.3));
  CHECK(zero.value == 0.0);
  CHECK(zero.grad.isZero(0.0));
}

TEST_CASE("grad4 matches per-cell neighbor differences") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<Index> dim(1, 9);
  for (int i = 0; i < kInstances; ++i) {
    const Index h = dim(rng), w = dim(rng);
    const Grid m = oracle::random_grid(h, w, rng);
    const GradientField g = grad4(m);
    double worst = 0;
    for (Index r = 0; r < h; ++r) {
      for (Index c = 0; c < w; ++c) {
        const auto ref = oracle::grad_at(m, r, c);
        for (std::size_t d = 0; d < 4; ++d) worst = std::max(worst, std::abs(g[d](r, c) - ref[d]));
      }
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("grad4_adjoint is the adjoint of grad4") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 20; ++i) {
    const Grid m = oracle::random_grid(5, 7, rng, -1, 1);
    GradientField u;
    for (auto& d : u) d = oracle::random_grid(5, 7, rng, -1, 1);
    const GradientField g = grad4(m);
    double lhs = 0;
    for (std::size_t d = 0; d < 4; ++d) lhs += (g[d].array() * u[d].array()).sum();
    const double rhs = (m.array() * grad4_adjoint(u).array()).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("cosine similarity conventions") {
  CHECK(cosine_similarity4({0, 0, 0, 0}, {0, 0, 0, 0}) == 1.0);
  CHECK(cosine_similarity4({1, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
  CHECK(cosine_similarity4({0, 0, 0, 0}, {0, 2, 0, 0}) == 0.0);
  CHECK(cosine_similarity4({1, 2, 3, 4}, {2, 4, 6, 8}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity4({1, 0, 0, 0}, {-1, 0, 0, 0}) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("loss_gra matches the brute-force oracle including flat regions") {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<Index> dim(1, 9);
  for (int i = 0; i < kInstances; ++i) {
    const Index h = dim(rng), w = dim(rng);
    const bool plateaus = i % 2 == 1;
    const Grid p = random_instance(rng, h, w, plateaus);
    const Grid psi = random_instance(rng, h, w, plateaus);
    CHECK(std::abs(loss_gra(p, psi).value - oracle::loss_gra(p, psi)) <= 1e-12);
  }
  const Grid m = oracle::random_grid(6, 6, rng);
  CHECK(std::abs(loss_gra(m, m).value) <= 1e-15);
  CHECK(std::abs(loss_gra(m, 2.0 * m).value) <= 1e-14);
}

TEST_CASE("loss_gra gradient matches central differences on smooth instances") {
  std::mt19937_64 rng(16);
  for (int i = 0; i < 10; ++i) {
    const Grid p = oracle::random_grid(6, 5, rng);
    const Grid psi = oracle::random_grid(6, 5, rng);
    const LossGrad lg = loss_gra(p, psi);
    for (Index r = 0; r < p.rows(); ++r) {
      for (Index c = 0; c < p.cols(); ++c) {
        const double fd = grid_fd([&](const Grid& x) { return oracle::loss_gra(x, psi); }, p, r, c);
        CHECK(lg.grad(r, c) == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
      }
    }
  }
}

TEST_CASE("loss_con matches the brute-force oracle") {
  std::mt19937_64 rng(17);
  const std::vector<std::pair<Index, Index>> shapes{{1, 2}, {2, 3}};
  std::uniform_int_distribution<int> count(1, 5);
  for (int i = 0; i < kInstances; ++i) {
    const auto local = random_tree(rng, shapes);
    const auto global = random_tree(rng, shapes);
    std::vector<ParamTree<double>> prev;
    std::vector<std::vector<double>> prev_flat;
    const int n = count(rng);
    for (int k = 0; k < n; ++k) {
      prev.push_back(random_tree(rng, shapes));
      prev_flat.push_back(oracle::flat(prev.back()));
    }
    const ConLoss cl = loss_con(local, global, prev);
    CHECK(std::abs(cl.value - oracle::loss_con(oracle::flat(local), oracle::flat(global), prev_flat)) <= 1e-12);
    CHECK_FALSE(cl.degenerate);
  }
}

TEST_CASE("loss_con gradient matches central differences") {
  std::mt19937_64 rng(18);
  const std::vector<std::pair<Index, Index>> shapes{{1, 2}};
  const auto local = random_tree(rng, shapes);
  const auto global = random_tree(rng, shapes);
  std::vector<ParamTree<double>> prev{random_tree(rng, shapes), random_tree(rng, shapes), random_tree(rng, shapes)};
  const ConLoss cl = loss_con(local, global, prev);
  const auto g = cl.grad.flatten();
  const auto x0 = local.flatten();
  for (Index i = 0; i < x0.size(); ++i) {
    auto probe = local;
    auto x = x0;
    x[i] += 1e-6;
    probe.assign(x);
    const double up = loss_con(probe, global, prev).value;
    x[i] -= 2e-6;
    probe.assign(x);
    const double down = loss_con(probe, global, prev).value;
    CHECK(g[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-6).scale(1e-8));
  }
}

TEST_CASE("loss_con conventions") {
  std::mt19937_64 rng(19);
  const std::vector<std::pair<Index, Index>> shapes{{2, 2}};
  const auto local = random_tree(rng, shapes);
  const auto global = random_tree(rng, shapes);

  SUBCASE("first round is exactly zero") {
    const ConLoss cl = loss_con(local, global, {});
    CHECK(cl.value == 0.0);
    CHECK(cl.grad.flatten().isZero(0.0));
  }
  SUBCASE("local equal to global is exactly zero") {
    const ConLoss cl = loss_con(local, local, {random_tree(rng, shapes), random_tree(rng, shapes)});
    CHECK(cl.value == 0.0);
    CHECK_FALSE(cl.degenerate);
  }
  SUBCASE("degenerate denominator") {
    const ConLoss cl = loss_con(local, global, {local, local});
    CHECK(cl.value == 0.0);
    CHECK(cl.degenerate);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(loss_con(local, random_tree(rng, {{1, 2}}), {}), ShapeError);
  }
}

TEST_CASE("loss_con scalar toy example") {
  auto scalar = [](double v) {
    ParamTree<double> t;
    t.convs.push_back({ConvParams<double>::Matrix::Zero(1, 0), ConvParams<double>::Vector::Constant(1, v)});
    return t;
  };
  const ConLoss cl = loss_con(scalar(2), scalar(1), {scalar(0), scalar(4)});
  CHECK(cl.value == 0.25);
}

TEST_CASE("loss weights") {
  LossWeights w{2.0, 0.5};
  CHECK(loss_total(0.25, 1.0, w) == 1.0);
  CHECK_THROWS_AS((LossWeights{-1.0, 0.1}.validate()), ValidationError);
}
