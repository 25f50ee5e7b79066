#include "pidrme/sampling.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <tuple>
#include <string>
#include <utility>

#include "pidrme/error.hpp"

namespace pidrme {

namespace {

// Partial Fisher-Yates over the cells of columns [col0, col1).
void draw_region(const RadioMap& map, Index col0, Index col1, double rate, std::mt19937_64& rng,
                 std::vector<Sample>& out) {
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(map.height() * (col1 - col0)));
  for (Index r = 0; r < map.height(); ++r) {
    for (Index c = col0; c < col1; ++c) cells.push_back({r, c});
  }
  const auto count = static_cast<std::size_t>(round_half_up(rate * static_cast<double>(cells.size())));
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
    std::swap(cells[i], cells[pick(rng)]);
    out.push_back({cells[i].row, cells[i].col, map(cells[i].row, cells[i].col)});
  }
}

}  // namespace

void SparseObservation::validate() const {
  if (width < 1 || height < 1) throw ValidationError("observation grid is empty");
  std::set<std::pair<Index, Index>> seen;
  for (const auto& s : samples) {
    if (s.row < 0 || s.row >= height || s.col < 0 || s.col >= width) {
      throw ValidationError("sample outside the grid");
    }
    if (!seen.insert({s.row, s.col}).second) throw ValidationError("duplicate sample position");
  }
  if (2 * static_cast<Index>(samples.size()) > width * height) {
    throw ValidationError("too many samples: K must not exceed half the grid");
  }
  for (const auto& t : tx_positions) {
    if (t.row < 0 || t.row >= height || t.col < 0 || t.col >= width) {
      throw ValidationError("transmitter outside the grid");
    }
  }
}

SamplingPlan plan_case(SamplingCase sampling_case, std::uint64_t seed) {
  switch (sampling_case) {
    case SamplingCase::Case1:
      return {kCase1Rate, kCase1Rate, false};
    case SamplingCase::Case2: {
      std::mt19937_64 rng(seed);
      const double rate = std::uniform_real_distribution<double>(kCase2MinRate, kCase2MaxRate)(rng);
      return {rate, rate, false};
    }
    case SamplingCase::Case3:
      return {kCase3SparseRate, kCase3DenseRate, true};
  }
  throw ValidationError("unknown sampling case");
}

SparseObservation sample_plan(const RadioMap& map, const std::vector<Cell>& tx, const SamplingPlan& plan,
                              std::uint64_t seed) {
  map.validate();
  if (plan.left_rate < 0 || plan.right_rate < 0 || plan.left_rate > 0.5 || plan.right_rate > 0.5) {
    throw SamplingError("sampling rates must lie in [0, 0.5]");
  }
  std::mt19937_64 rng(seed);
  SparseObservation obs{map.width(), map.height(), {}, tx};
  if (plan.split) {
    const Index half = map.width() / 2;
    draw_region(map, 0, half, plan.left_rate, rng, obs.samples);
    draw_region(map, half, map.width(), plan.right_rate, rng, obs.samples);
  } else {
    draw_region(map, 0, map.width(), plan.left_rate, rng, obs.samples);
  }
  if (obs.samples.empty()) throw SamplingError("empty observation: sample count rounds to 0");
  std::sort(obs.samples.begin(), obs.samples.end(),
            [](const Sample& a, const Sample& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  obs.validate();
  return obs;
}

SparseObservation sample_case(const RadioMap& map, const std::vector<Cell>& tx, SamplingCase sampling_case,
                              std::uint64_t seed) {
  return sample_plan(map, tx, plan_case(sampling_case, mix_seed(seed, 1)), seed);
}

std::vector<Cell> tile_offsets(Index width, Index height, Index tile, Index stride) {
  if (tile < 1 || stride < 1) throw ValidationError("tile and stride must be >= 1");
  if (tile > width || tile > height) throw ValidationError("tile larger than the map");
  if ((width - tile) % stride != 0) {
    throw ValidationError("width: (" + std::to_string(width) + " - " + std::to_string(tile) +
                          ") is not divisible by stride " + std::to_string(stride));
  }
  if ((height - tile) % stride != 0) {
    throw ValidationError("height: (" + std::to_string(height) + " - " + std::to_string(tile) +
                          ") is not divisible by stride " + std::to_string(stride));
  }
  std::vector<Cell> offsets;
  for (Index r = 0; r + tile <= height; r += stride) {
    for (Index c = 0; c + tile <= width; c += stride) offsets.push_back({r, c});
  }
  return offsets;
}

std::vector<RadioMap> tile_augment(const RadioMap& map, Index tile, Index stride) {
  std::vector<RadioMap> tiles;
  for (const auto& o : tile_offsets(map.width(), map.height(), tile, stride)) {
    tiles.emplace_back(Grid(map.values.block(o.row, o.col, tile, tile)));
  }
  return tiles;
}

SparseObservation crop_observation(const SparseObservation& obs, const Cell& offset, Index tile) {
  auto inside = [&](Index r, Index c) {
    return r >= offset.row && r < offset.row + tile && c >= offset.col && c < offset.col + tile;
  };
  SparseObservation out{tile, tile, {}, {}};
  for (const auto& s : obs.samples) {
    if (inside(s.row, s.col)) out.samples.push_back({s.row - offset.row, s.col - offset.col, s.power_dbm});
  }
  for (const auto& t : obs.tx_positions) {
    if (inside(t.row, t.col)) out.tx_positions.push_back({t.row - offset.row, t.col - offset.col});
  }
  return out;
}

InputTensor rasterize_input(const SparseObservation& obs) {
  InputTensor x(kInputChannels, obs.height, obs.width);
  for (const auto& s : obs.samples) {
    x(0, s.row, s.col) = normalize_dbm(s.power_dbm);
    x(1, s.row, s.col) = 1.0;
  }
  for (const auto& t : obs.tx_positions) x(2, t.row, t.col) = 1.0;
  return x;
}

}  // namespace pidrme
