#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pidrme/gradcheck.hpp"

namespace pidrme {

struct GradCheckCase {
  std::string name;
  GradCheckResult result;
  double threshold = 0.0;
  bool passed() const { return result.max_rel_error < threshold; }
};

struct GradCheckSuiteOptions {
  std::uint64_t seed = 1;
  Index size = 16;              // spatial extent of the full-autoencoder inputs
  Index max_per_tensor = 48;    // probes per weight matrix / bias for the full autoencoders
  double linear_threshold = 1e-7;
  double layer_threshold = 1e-4;
  double loss_threshold = 1e-3;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double seconds = 0.0;

  double max_rel_error() const;
  bool passed() const;
};

/// Finite-difference checks of every layer type, linear stacks, both full
/// autoencoders, the composite reconstruction loss and the weighted gradient loss.
GradCheckReport run_gradcheck_suite(const GradCheckSuiteOptions& opts = {});

}  // namespace pidrme
