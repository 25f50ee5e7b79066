#pragma once

#include <vector>

#include "pidrme/sampling.hpp"
#include "pidrme/units.hpp"

namespace pidrme {

/// Per-transmitter log-distance pathloss parameters.
struct LdplParams {
  std::vector<double> alpha;  // dBm at the 1-cell reference distance
  std::vector<double> theta;  // pathloss exponent

  std::size_t size() const { return alpha.size(); }
};

struct LdplFit {
  LdplParams params;
  double residual = 0.0;          // sum of squared errors at the returned params
  double initial_residual = 0.0;  // same, at the initial guess
  int iterations = 0;
  bool converged = true;
  bool closed_form = false;
};

struct LdplFitOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-9;
  double theta_min = 0.5;
  double theta_max = 8.0;
};

/// Dense template of received power in dBm.
using Template = Grid;

/// Sum over transmitters of (alpha_m - 10 theta_m log10 d_m), d clamped to >= 1 cell.
/// Contributions add in dB.
double ldpl_predict(const LdplParams& params, const std::vector<Cell>& tx, const Cell& point);

double ldpl_residual(const LdplParams& params, const SparseObservation& obs);

/// Least-squares fit of the pathloss parameters to the observed samples.
/// One transmitter: closed-form regression of power on -10 log10 d. Otherwise
/// Levenberg-damped Gauss-Newton with theta projected to [theta_min, theta_max].
LdplFit fit_ldpl(const SparseObservation& obs, const LdplFitOptions& options = {});

/// The iterative path alone, also usable for one transmitter.
LdplFit fit_ldpl_iterative(const SparseObservation& obs, const LdplFitOptions& options = {});

Template mbi_upsample(const LdplParams& params, const std::vector<Cell>& tx, Index width, Index height);

}  // namespace pidrme
