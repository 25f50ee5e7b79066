#include "pidrme/ldpl.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "pidrme/error.hpp"

namespace pidrme {

namespace {

double log_distance_term(const Cell& tx, const Cell& point) {
  return -10.0 * std::log10(std::max(cell_distance(tx, point), 1.0));
}

// Row j: [1 ... 1 | -10 log10 d_j1 ... -10 log10 d_jM]; prediction = X * [alpha; theta].
Eigen::MatrixXd design_matrix(const SparseObservation& obs) {
  const auto m = static_cast<Index>(obs.tx_positions.size());
  Eigen::MatrixXd x(static_cast<Index>(obs.samples.size()), 2 * m);
  for (Index j = 0; j < x.rows(); ++j) {
    const auto& s = obs.samples[static_cast<std::size_t>(j)];
    for (Index t = 0; t < m; ++t) {
      x(j, t) = 1.0;
      x(j, m + t) = log_distance_term(obs.tx_positions[static_cast<std::size_t>(t)], {s.row, s.col});
    }
  }
  return x;
}

Eigen::VectorXd observed(const SparseObservation& obs) {
  Eigen::VectorXd y(static_cast<Index>(obs.samples.size()));
  for (Index j = 0; j < y.size(); ++j) y(j) = obs.samples[static_cast<std::size_t>(j)].power_dbm;
  return y;
}

LdplParams unpack(const Eigen::VectorXd& p) {
  const Index m = p.size() / 2;
  LdplParams out;
  for (Index t = 0; t < m; ++t) {
    out.alpha.push_back(p(t));
    out.theta.push_back(p(m + t));
  }
  return out;
}

void check_fit_inputs(const SparseObservation& obs) {
  obs.validate();
  const std::size_t m = obs.tx_positions.size();
  if (m == 0) throw FitError("fit_ldpl: no transmitters");
  if (obs.samples.size() < 2 * m) {
    throw FitError("fit_ldpl: underdetermined, K = " + std::to_string(obs.samples.size()) + " < 2M = " +
                   std::to_string(2 * m));
  }
}

}  // namespace

double ldpl_predict(const LdplParams& params, const std::vector<Cell>& tx, const Cell& point) {
  if (tx.empty() || params.size() != tx.size() || params.theta.size() != tx.size()) {
    throw ValidationError("ldpl_predict: parameter count does not match transmitter count");
  }
  double p = 0.0;
  for (std::size_t m = 0; m < tx.size(); ++m) p += params.alpha[m] + params.theta[m] * log_distance_term(tx[m], point);
  return p;
}

double ldpl_residual(const LdplParams& params, const SparseObservation& obs) {
  double sq = 0.0;
  for (const auto& s : obs.samples) {
    const double e = s.power_dbm - ldpl_predict(params, obs.tx_positions, {s.row, s.col});
    sq += e * e;
  }
  return sq;
}

LdplFit fit_ldpl_iterative(const SparseObservation& obs, const LdplFitOptions& options) {
  check_fit_inputs(obs);
  const Eigen::MatrixXd x = design_matrix(obs);
  const Eigen::VectorXd y = observed(obs);
  const Index m = x.cols() / 2;

  Eigen::VectorXd p(2 * m);
  p.head(m).setConstant(y.maxCoeff());
  p.tail(m).setConstant(2.0);
  auto project = [&](Eigen::VectorXd& v) {
    v.tail(m) = v.tail(m).cwiseMax(options.theta_min).cwiseMin(options.theta_max);
  };
  project(p);

  const Eigen::MatrixXd normal = x.transpose() * x;
  double cost = (y - x * p).squaredNorm();
  LdplFit fit;
  fit.initial_residual = cost;
  fit.converged = false;
  double lambda = 1e-6 * std::max(normal.diagonal().maxCoeff(), 1.0);

  for (int it = 1; it <= options.max_iterations; ++it) {
    fit.iterations = it;
    if (cost == 0.0) {
      fit.converged = true;
      break;
    }
    const Eigen::VectorXd rhs = x.transpose() * (y - x * p);
    Eigen::MatrixXd damped = normal;
    damped.diagonal().array() += lambda;
    Eigen::VectorXd candidate = p + damped.ldlt().solve(rhs);
    project(candidate);
    const double next = (y - x * candidate).squaredNorm();
    if (next < cost) {
      const double rel = (cost - next) / cost;
      p = candidate;
      cost = next;
      lambda = std::max(lambda / 10.0, 1e-15);
      if (rel < options.relative_tolerance) {
        fit.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e15) {
        // no descent direction left inside the feasible box
        fit.converged = true;
        break;
      }
    }
  }
  fit.params = unpack(p);
  fit.residual = cost;
  return fit;
}

LdplFit fit_ldpl(const SparseObservation& obs, const LdplFitOptions& options) {
  check_fit_inputs(obs);
  if (obs.tx_positions.size() != 1) return fit_ldpl_iterative(obs, options);

  const Eigen::MatrixXd x = design_matrix(obs);
  const Eigen::VectorXd y = observed(obs);
  const Eigen::VectorXd coef = x.colPivHouseholderQr().solve(y);
  if (!coef.allFinite() || coef(1) < options.theta_min || coef(1) > options.theta_max) {
    return fit_ldpl_iterative(obs, options);
  }
  LdplFit fit;
  fit.params = unpack(coef);
  fit.residual = (y - x * coef).squaredNorm();
  Eigen::Vector2d init(y.maxCoeff(), 2.0);
  fit.initial_residual = (y - x * init).squaredNorm();
  fit.closed_form = true;
  return fit;
}

Template mbi_upsample(const LdplParams& params, const std::vector<Cell>& tx, Index width, Index height) {
  Template psi(height, width);
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < width; ++c) psi(r, c) = ldpl_predict(params, tx, {r, c});
  }
  return psi;
}

}  // namespace pidrme
