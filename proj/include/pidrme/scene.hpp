#pragma once

#include <cstdint>
#include <vector>

#include "pidrme/units.hpp"

namespace pidrme {

struct Transmitter {
  Cell position;
  double power_dbm = 23.0;
  double exponent = 2.0;
  friend bool operator==(const Transmitter&, const Transmitter&) = default;
};

/// Axis-aligned building covering rows [row0, row1) and columns [col0, col1).
struct Building {
  Index row0 = 0;
  Index col0 = 0;
  Index row1 = 0;
  Index col1 = 0;
  bool contains(const Cell& c) const { return c.row >= row0 && c.row < row1 && c.col >= col0 && c.col < col1; }
  friend bool operator==(const Building&, const Building&) = default;
};

struct SceneConfig {
  Index width = 64;
  Index height = 64;
  double cell_size = 1.0;  // meters
  Index tx_min = 1;
  Index tx_max = 3;
  double power_dbm = 23.0;
  double exponent_min = 2.0;
  double exponent_max = 4.0;
  Index buildings_min = 0;
  Index buildings_max = 12;
  Index building_size_min = 4;
  Index building_size_max = 12;
  double noise_sigma_db = 1.0;
  double shadow_loss_db = 20.0;
  Index max_shadowing_buildings = 3;
  Index max_retries = 1000;

  void validate() const;
};

struct Scene {
  Index width = 0;
  Index height = 0;
  double cell_size = 1.0;
  std::vector<Transmitter> transmitters;
  std::vector<Building> buildings;
  double noise_sigma_db = 1.0;
  double shadow_loss_db = 20.0;
  Index max_shadowing_buildings = 3;

  void validate() const;
  std::vector<Cell> tx_positions() const;
  friend bool operator==(const Scene&, const Scene&) = default;
};

struct RadioMap {
  Grid values;  // dBm, rows = height

  RadioMap() = default;
  explicit RadioMap(Grid v) : values(std::move(v)) {}
  Index width() const { return values.cols(); }
  Index height() const { return values.rows(); }
  double operator()(Index r, Index c) const { return values(r, c); }
  void validate() const;
};

Scene generate_scene(std::uint64_t seed, const SceneConfig& config);

/// Same buildings, freshly drawn transmitters that avoid them.
Scene resample_transmitters(const Scene& base, std::uint64_t seed, const SceneConfig& config);

/// True when the segment between the centers of `from` and `to` passes through the building.
bool segment_hits_building(const Cell& from, const Cell& to, const Building& b);

/// Number of distinct buildings on the line of sight, capped at the scene's maximum.
Index occluding_buildings(const Scene& scene, const Cell& tx, const Cell& rx);

/// Noiseless received power of a single transmitter at a cell, dBm.
double transmitter_power_dbm(const Scene& scene, const Transmitter& tx, const Cell& rx);

RadioMap render_radio_map(const Scene& scene, std::uint64_t noise_seed);

}  // namespace pidrme
