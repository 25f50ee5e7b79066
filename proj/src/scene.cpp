#include "pidrme/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pidrme/error.hpp"

namespace pidrme {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Index uniform_index(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

std::vector<Transmitter> draw_transmitters(std::mt19937_64& rng, const SceneConfig& config,
                                           const std::vector<Building>& avoid) {
  const Index count = uniform_index(rng, config.tx_min, config.tx_max);
  std::vector<Transmitter> txs;
  for (Index m = 0; m < count; ++m) {
    Index attempts = 0;
    for (;;) {
      if (attempts++ >= config.max_retries) {
        throw GenerationError("cannot place transmitter " + std::to_string(m) + " outside buildings after " +
                              std::to_string(config.max_retries) + " retries (building coverage too dense)");
      }
      Cell c{uniform_index(rng, 0, config.height - 1), uniform_index(rng, 0, config.width - 1)};
      const bool blocked = std::any_of(avoid.begin(), avoid.end(), [&](const Building& b) { return b.contains(c); });
      const bool taken = std::any_of(txs.begin(), txs.end(), [&](const Transmitter& t) { return t.position == c; });
      if (blocked || taken) continue;
      txs.push_back({c, config.power_dbm, uniform_real(rng, config.exponent_min, config.exponent_max)});
      break;
    }
  }
  return txs;
}

}  // namespace

void SceneConfig::validate() const {
  require(width >= 16 && height >= 16, "scene grid must be at least 16x16");
  require(cell_size > 0, "cell_size must be > 0");
  require(tx_min >= 1 && tx_min <= tx_max, "need 1 <= tx_min <= tx_max");
  require(exponent_min > 0 && exponent_min <= exponent_max, "need 0 < exponent_min <= exponent_max");
  require(buildings_min >= 0 && buildings_min <= buildings_max, "need 0 <= buildings_min <= buildings_max");
  require(building_size_min >= 1 && building_size_min <= building_size_max,
          "need 1 <= building_size_min <= building_size_max");
  require(building_size_max <= std::min(width, height), "building_size_max exceeds the grid");
  require(noise_sigma_db >= 0, "noise_sigma_db must be >= 0");
  require(shadow_loss_db >= 0, "shadow_loss_db must be >= 0");
  require(max_shadowing_buildings >= 0, "max_shadowing_buildings must be >= 0");
  require(max_retries >= 1, "max_retries must be >= 1");
  require(std::isfinite(power_dbm), "power_dbm must be finite");
}

void Scene::validate() const {
  require(width >= 1 && height >= 1, "scene grid is empty");
  require(noise_sigma_db >= 0 && shadow_loss_db >= 0, "noise and shadow loss must be >= 0");
  for (const auto& t : transmitters) {
    require(t.position.row >= 0 && t.position.row < height && t.position.col >= 0 && t.position.col < width,
            "transmitter outside the grid");
    require(t.exponent > 0, "transmitter exponent must be > 0");
    for (const auto& b : buildings) require(!b.contains(t.position), "transmitter inside a building");
  }
  for (const auto& b : buildings) {
    require(b.row0 >= 0 && b.col0 >= 0 && b.row0 < b.row1 && b.col0 < b.col1 && b.row1 <= height && b.col1 <= width,
            "building outside the grid");
  }
}

std::vector<Cell> Scene::tx_positions() const {
  std::vector<Cell> out;
  out.reserve(transmitters.size());
  for (const auto& t : transmitters) out.push_back(t.position);
  return out;
}

void RadioMap::validate() const {
  if (values.size() == 0) throw ValidationError("radio map is empty");
  if (!values.allFinite()) throw ValidationError("radio map has non-finite values");
}

Scene generate_scene(std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  Scene scene;
  scene.width = config.width;
  scene.height = config.height;
  scene.cell_size = config.cell_size;
  scene.noise_sigma_db = config.noise_sigma_db;
  scene.shadow_loss_db = config.shadow_loss_db;
  scene.max_shadowing_buildings = config.max_shadowing_buildings;
  scene.transmitters = draw_transmitters(rng, config, {});

  const Index count = uniform_index(rng, config.buildings_min, config.buildings_max);
  for (Index k = 0; k < count; ++k) {
    Index attempts = 0;
    for (;;) {
      if (attempts++ >= config.max_retries) {
        throw GenerationError("cannot place building " + std::to_string(k) + " without covering a transmitter after " +
                              std::to_string(config.max_retries) + " retries (reduce buildings_max or building_size_max)");
      }
      const Index h = uniform_index(rng, config.building_size_min, config.building_size_max);
      const Index w = uniform_index(rng, config.building_size_min, config.building_size_max);
      const Index r0 = uniform_index(rng, 0, config.height - h);
      const Index c0 = uniform_index(rng, 0, config.width - w);
      const Building b{r0, c0, r0 + h, c0 + w};
      const bool covers = std::any_of(scene.transmitters.begin(), scene.transmitters.end(),
                                      [&](const Transmitter& t) { return b.contains(t.position); });
      if (covers) continue;
      scene.buildings.push_back(b);
      break;
    }
  }
  scene.validate();
  return scene;
}

Scene resample_transmitters(const Scene& base, std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  if (config.width != base.width || config.height != base.height) {
    throw ValidationError("resample_transmitters: config grid does not match the scene");
  }
  std::mt19937_64 rng(seed);
  Scene scene = base;
  scene.transmitters = draw_transmitters(rng, config, base.buildings);
  scene.validate();
  return scene;
}

bool segment_hits_building(const Cell& from, const Cell& to, const Building& b) {
  // Cell centers sit at integer coordinates, so the building occupies the
  // closed box [row0 - 0.5, row1 - 0.5] x [col0 - 0.5, col1 - 0.5].
  const double p[2] = {static_cast<double>(from.row), static_cast<double>(from.col)};
  const double d[2] = {static_cast<double>(to.row - from.row), static_cast<double>(to.col - from.col)};
  const double lo[2] = {b.row0 - 0.5, b.col0 - 0.5};
  const double hi[2] = {b.row1 - 0.5, b.col1 - 0.5};
  double t0 = 0.0;
  double t1 = 1.0;
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) {
      if (p[axis] < lo[axis] || p[axis] > hi[axis]) return false;
      continue;
    }
    double ta = (lo[axis] - p[axis]) / d[axis];
    double tb = (hi[axis] - p[axis]) / d[axis];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

Index occluding_buildings(const Scene& scene, const Cell& tx, const Cell& rx) {
  Index hits = 0;
  for (const auto& b : scene.buildings) {
    if (segment_hits_building(tx, rx, b)) ++hits;
  }
  return std::min(hits, scene.max_shadowing_buildings);
}

double transmitter_power_dbm(const Scene& scene, const Transmitter& tx, const Cell& rx) {
  const double d = std::max(cell_distance(tx.position, rx), 1.0) * scene.cell_size;
  const double shadow = scene.shadow_loss_db * static_cast<double>(occluding_buildings(scene, tx.position, rx));
  return tx.power_dbm - 10.0 * tx.exponent * std::log10(d) - shadow;
}

RadioMap render_radio_map(const Scene& scene, std::uint64_t noise_seed) {
  scene.validate();
  if (scene.transmitters.empty()) throw ValidationError("render: scene has no transmitters");
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Grid values(scene.height, scene.width);
  for (Index r = 0; r < scene.height; ++r) {
    for (Index c = 0; c < scene.width; ++c) {
      double linear_mw = 0.0;
      for (const auto& tx : scene.transmitters) {
        linear_mw += std::pow(10.0, transmitter_power_dbm(scene, tx, {r, c}) / 10.0);
      }
      const double eta = noise(rng) * scene.noise_sigma_db;
      values(r, c) = 10.0 * std::log10(linear_mw) + eta;
    }
  }
  RadioMap map(std::move(values));
  map.validate();
  return map;
}

}  // namespace pidrme
