#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace pidrme {

using Index = Eigen::Index;

/// Dense row-major 2-D grid; rows are the vertical (row) axis, columns the horizontal one.
template <typename Scalar>
using GridT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Grid = GridT<double>;

struct Cell {
  Index row = 0;
  Index col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Global dBm <-> [0,1] affine map shared by every module.
inline constexpr double kFloorDbm = -120.0;
inline constexpr double kCeilDbm = 23.0;

inline double normalize_dbm(double dbm) {
  return std::clamp((dbm - kFloorDbm) / (kCeilDbm - kFloorDbm), 0.0, 1.0);
}

inline double denormalize_dbm(double unit) { return kFloorDbm + unit * (kCeilDbm - kFloorDbm); }

template <typename Derived>
Grid normalize_grid(const Eigen::MatrixBase<Derived>& dbm) {
  return dbm.unaryExpr([](double v) { return normalize_dbm(v); });
}

template <typename Derived>
Grid denormalize_grid(const Eigen::MatrixBase<Derived>& unit) {
  return unit.unaryExpr([](double v) { return denormalize_dbm(v); });
}

/// Round half up: 20.5 -> 21, 20.48 -> 20.
inline std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

inline double cell_distance(const Cell& a, const Cell& b) {
  const double dr = static_cast<double>(a.row - b.row);
  const double dc = static_cast<double>(a.col - b.col);
  return std::sqrt(dr * dr + dc * dc);
}

/// SplitMix64 finalizer, used to derive independent sub-seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace pidrme
