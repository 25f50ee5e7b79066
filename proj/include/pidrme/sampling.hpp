#pragma once

#include <cstdint>
#include <vector>

#include "pidrme/scene.hpp"
#include "pidrme/tensor.hpp"

namespace pidrme {

struct Sample {
  Index row = 0;
  Index col = 0;
  double power_dbm = 0.0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// K sampled (position, power) pairs plus the transmitter positions.
struct SparseObservation {
  Index width = 0;
  Index height = 0;
  std::vector<Sample> samples;
  std::vector<Cell> tx_positions;

  void validate() const;
};

enum class SamplingCase { Case1 = 1, Case2 = 2, Case3 = 3 };

/// Sampling rates for the left and right column halves (equal unless split).
struct SamplingPlan {
  double left_rate = 0.125;
  double right_rate = 0.125;
  bool split = false;
};

inline constexpr double kCase1Rate = 0.125;
inline constexpr double kCase2MinRate = 0.01;
inline constexpr double kCase2MaxRate = 0.10;
inline constexpr double kCase3SparseRate = 0.01;
inline constexpr double kCase3DenseRate = 0.10;

/// Case 2 draws its rate here, once; callers reuse the plan for all maps of a client.
SamplingPlan plan_case(SamplingCase sampling_case, std::uint64_t seed);

SparseObservation sample_plan(const RadioMap& map, const std::vector<Cell>& tx, const SamplingPlan& plan,
                              std::uint64_t seed);

SparseObservation sample_case(const RadioMap& map, const std::vector<Cell>& tx, SamplingCase sampling_case,
                              std::uint64_t seed);

/// Top-left corners of all tiles, row-major.
std::vector<Cell> tile_offsets(Index width, Index height, Index tile, Index stride);

std::vector<RadioMap> tile_augment(const RadioMap& map, Index tile, Index stride);

/// Samples and transmitters falling inside the tile, re-based to tile coordinates.
SparseObservation crop_observation(const SparseObservation& obs, const Cell& offset, Index tile);

using InputTensor = Tensor<double>;
inline constexpr Index kInputChannels = 3;

/// ch0 normalized power (0 where unsampled), ch1 sample mask, ch2 transmitter indicator.
InputTensor rasterize_input(const SparseObservation& obs);

}  // namespace pidrme
