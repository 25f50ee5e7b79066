#include <doctest.h>

#include <random>

#include "pidrme/model.hpp"

using namespace pidrme;

namespace {

Tensord random_input(std::mt19937_64& rng, Index c, Index h, Index w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensord t(c, h, w);
  for (Index i = 0; i < t.size(); ++i) t.data().data()[i] = u(rng);
  return t;
}

}  // namespace

TEST_CASE("autoencoder shapes") {
  CHECK(common_net().in_channels() == 3);
  CHECK(individual_net().in_channels() == 4);
  CHECK(common_net().encoder().conv_count() == 3);
  std::mt19937_64 rng(31);
  const CommonAE com = common_net().init_params(1);
  const IndividualAE ind = individual_net().init_params(2);
  for (Index side : {8, 16, 32, 64}) {
    const auto x = random_input(rng, 3, side, side);
    const auto phi = forward_common(com, x);
    CHECK(phi.channels() == 1);
    CHECK(phi.height() == side);
    CHECK(phi.width() == side);
    CHECK((phi.data().array() > 0).all());
    CHECK((phi.data().array() < 1).all());
    const auto est = forward_individual(ind, phi, x);
    CHECK(est.same_shape(phi));
  }
  const auto rect = forward_common(com, random_input(rng, 3, 16, 24));
  CHECK(rect.height() == 16);
  CHECK(rect.width() == 24);
}

TEST_CASE("autoencoder rejects extents not divisible by the downsampling factor") {
  std::mt19937_64 rng(32);
  const CommonAE com = common_net().init_params(1);
  CHECK_THROWS_AS(forward_common(com, random_input(rng, 3, 12, 16)), ShapeError);
  CHECK_THROWS_AS(forward_common(com, random_input(rng, 3, 16, 20)), ShapeError);
  CHECK_THROWS_AS(forward_common(com, random_input(rng, 2, 16, 16)), ShapeError);
}

TEST_CASE("parameter initialization is seeded") {
  CHECK(common_net().init_params(7) == common_net().init_params(7));
  CHECK_FALSE(common_net().init_params(7) == common_net().init_params(8));
  const auto z = common_net().zero_params();
  CHECK(z.joined().flatten().isZero(0.0));
  CHECK(z.size() == common_net().init_params(1).size());
}

TEST_CASE("joined parameters round-trip") {
  AutoencoderParams p = individual_net().init_params(3);
  const Params all = p.joined();
  CHECK(all.convs.size() == p.encoder.convs.size() + p.decoder.convs.size());
  AutoencoderParams q = individual_net().zero_params();
  q.assign_joined(all);
  CHECK(q == p);
}

TEST_CASE("zero decoder weights give a constant one-half estimate") {
  std::mt19937_64 rng(33);
  CommonAE com = common_net().init_params(4);
  com.decoder = com.decoder.zeros_like();
  const auto phi = forward_common(com, random_input(rng, 3, 16, 16));
  CHECK((phi.data().array() == 0.5).all());
}

TEST_CASE("individual backward returns a gradient for the common estimate") {
  std::mt19937_64 rng(34);
  const CommonAE com = common_net().init_params(5);
  const IndividualAE ind = individual_net().init_params(6);
  const auto x = random_input(rng, 3, 16, 16);
  AutoencoderNet::Trace ct, it;
  const auto phi = forward_common(com, x, &ct);
  const auto est = forward_individual(ind, phi, x, &it);
  Tensord g(1, 16, 16);
  g.data().setOnes();
  IndividualAE ig = zero_grads(ind);
  const auto gphi = backward_individual(ind, it, g, &ig);
  CHECK(gphi.same_shape(phi));
  CHECK(ig.joined().flatten().norm() > 0);
  CommonAE cg = zero_grads(com);
  backward_common(com, ct, gphi, &cg);
  CHECK(cg.joined().flatten().norm() > 0);
  CHECK(est.same_shape(phi));
}
