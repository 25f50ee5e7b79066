#include <doctest.h>

#include <set>

#include "pidrme/error.hpp"
#include "pidrme/sampling.hpp"

using namespace pidrme;

namespace {

RadioMap ramp(Index h, Index w) {
  Grid g(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) g(r, c) = -100.0 + static_cast<double>(r * w + c) * 1e-3;
  return RadioMap(g);
}

}  // namespace

TEST_CASE("Case-1 sampling on 64x64 yields 512 distinct cells") {
  const RadioMap map = ramp(64, 64);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto obs = sample_case(map, {{5, 5}}, SamplingCase::Case1, seed);
    CHECK(obs.samples.size() == 512);
    std::set<std::pair<Index, Index>> seen;
    for (const auto& s : obs.samples) {
      CHECK(seen.insert({s.row, s.col}).second);
      CHECK(s.power_dbm == map(s.row, s.col));
    }
  }
}

TEST_CASE("Case-3 counts per column half") {
  const RadioMap map = ramp(64, 64);
  const auto obs = sample_case(map, {}, SamplingCase::Case3, 4);
  std::size_t left = 0, right = 0;
  for (const auto& s : obs.samples) (s.col < 32 ? left : right)++;
  CHECK(left == 20);   // 2048 * 1% = 20.48
  CHECK(right == 205); // 2048 * 10% = 204.8
}

TEST_CASE("Case-2 rate lies in [1%, 10%] and is fixed by the plan") {
  const RadioMap map = ramp(64, 64);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const SamplingPlan plan = plan_case(SamplingCase::Case2, seed);
    CHECK(plan.left_rate >= kCase2MinRate);
    CHECK(plan.left_rate <= kCase2MaxRate);
    CHECK(plan.left_rate == plan.right_rate);
    const auto obs = sample_plan(map, {}, plan, seed + 100);
    CHECK(static_cast<std::int64_t>(obs.samples.size()) == round_half_up(plan.left_rate * 4096));
  }
}

TEST_CASE("sampling is deterministic and sorted row-major") {
  const RadioMap map = ramp(32, 32);
  const auto a = sample_case(map, {}, SamplingCase::Case1, 11);
  const auto b = sample_case(map, {}, SamplingCase::Case1, 11);
  const auto c = sample_case(map, {}, SamplingCase::Case1, 12);
  CHECK(a.samples == b.samples);
  CHECK_FALSE(a.samples == c.samples);
  for (std::size_t i = 1; i < a.samples.size(); ++i) {
    CHECK(std::make_pair(a.samples[i - 1].row, a.samples[i - 1].col) < std::make_pair(a.samples[i].row, a.samples[i].col));
  }
}

TEST_CASE("empty observations are rejected") {
  const RadioMap map = ramp(8, 8);
  CHECK_THROWS_AS(sample_plan(map, {}, {0.001, 0.001, false}, 1), SamplingError);
  CHECK_THROWS_AS(sample_plan(map, {}, {0.9, 0.9, false}, 1), SamplingError);
}

TEST_CASE("observation validation") {
  SparseObservation obs{4, 4, {{0, 0, -50}, {0, 0, -40}}, {}};
  CHECK_THROWS_AS(obs.validate(), ValidationError);
  obs.samples = {{0, 4, -50}};
  CHECK_THROWS_AS(obs.validate(), ValidationError);
  obs.samples.clear();
  for (Index i = 0; i < 9; ++i) obs.samples.push_back({i / 4, i % 4, -50});
  CHECK_THROWS_AS(obs.validate(), ValidationError);
  obs.samples.resize(8);
  CHECK_NOTHROW(obs.validate());
}

TEST_CASE("tiling counts") {
  CHECK(tile_offsets(256, 256, 64, 32).size() == 49);
  CHECK(tile_offsets(128, 128, 64, 32).size() == 9);
  CHECK(tile_offsets(64, 64, 64, 32).size() == 1);
  const auto tiles = tile_augment(ramp(128, 128), 64, 32);
  REQUIRE(tiles.size() == 9);
  CHECK(tiles[4](0, 0) == ramp(128, 128)(32, 32));
}

TEST_CASE("tiling with an incompatible stride names the axis") {
  try {
    tile_offsets(100, 96, 64, 32);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("width") != std::string::npos);
  }
  CHECK_THROWS_AS(tile_offsets(96, 100, 64, 32), ValidationError);
  CHECK_THROWS_AS(tile_offsets(32, 32, 64, 32), ValidationError);
}

TEST_CASE("cropping re-bases samples and transmitters") {
  SparseObservation obs{8, 8, {{1, 1, -10}, {5, 6, -20}, {7, 7, -30}}, {{4, 4}, {0, 0}}};
  const auto crop = crop_observation(obs, {4, 4}, 4);
  REQUIRE(crop.samples.size() == 2);
  CHECK(crop.samples[0] == Sample{1, 2, -20});
  CHECK(crop.samples[1] == Sample{3, 3, -30});
  REQUIRE(crop.tx_positions.size() == 1);
  CHECK(crop.tx_positions[0] == Cell{0, 0});
}

TEST_CASE("rasterized input channels") {
  SparseObservation obs{4, 4, {{1, 2, 23.0}, {3, 0, -120.0}}, {{2, 2}}};
  const InputTensor x = rasterize_input(obs);
  CHECK(x.channels() == kInputChannels);
  CHECK(x(0, 1, 2) == 1.0);
  CHECK(x(1, 1, 2) == 1.0);
  CHECK(x(0, 3, 0) == 0.0);
  CHECK(x(1, 3, 0) == 1.0);
  CHECK(x(1, 0, 0) == 0.0);
  CHECK(x(2, 2, 2) == 1.0);
  CHECK(x.channel(2).sum() == 1.0);
}
