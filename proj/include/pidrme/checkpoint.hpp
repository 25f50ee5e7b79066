#pragma once

#include <filesystem>
#include <string>

#include "pidrme/layers.hpp"

namespace pidrme {

// Parameter checkpoint layout:
//   line 1 (ASCII, '\n'-terminated):
//     PIDRME-PARAMS 1 <blocks> <out>x<in>x3x3 ...
//   payload: for each block, the weight in row-major (out, in, kr, kc) order
//   followed by the bias, as little-endian IEEE-754 float64.
std::string checkpoint_manifest(const ParamTree<double>& params);
void save_params(const ParamTree<double>& params, const std::filesystem::path& path);
ParamTree<double> load_params(const std::filesystem::path& path);

}  // namespace pidrme
