#pragma once

#include <cstdint>
#include <filesystem>

#include "pidrme/scene.hpp"

namespace pidrme {

struct PgmRange {
  double floor_dbm = kFloorDbm;
  double ceil_dbm = kCeilDbm;
};

/// dBm -> [0, 255], clamped and rounded half up.
std::uint8_t quantize_dbm(double dbm, const PgmRange& range = {});
double dequantize_pixel(int pixel, const PgmRange& range = {});

/// Reads P2 or P5 with maxval 255.
RadioMap import_pgm(const std::filesystem::path& path, const PgmRange& range = {});

/// Writes binary P5.
void export_pgm(const RadioMap& map, const std::filesystem::path& path, const PgmRange& range = {});

}  // namespace pidrme
