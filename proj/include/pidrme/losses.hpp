#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

#include "pidrme/error.hpp"
#include "pidrme/layers.hpp"
#include "pidrme/units.hpp"

namespace pidrme {

/// Value of a loss and its gradient w.r.t. the predicted grid.
struct LossGrad {
  double value = 0.0;
  Grid grad;
};

template <typename A, typename B>
void require_same_extent(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

/// Frobenius norm of the difference divided by the cell count.
LossGrad loss_rec(const Grid& pred, const Grid& truth);

enum Direction : std::size_t { kLeft = 0, kRight = 1, kUp = 2, kDown = 3 };

/// Four neighbor differences per cell, neighbor minus center; borders replicate (difference 0).
using GradientField = std::array<Grid, 4>;

template <typename Derived>
GradientField grad4(const Eigen::MatrixBase<Derived>& map) {
  const Index h = map.rows();
  const Index w = map.cols();
  GradientField g;
  for (auto& d : g) d = Grid::Zero(h, w);
  if (w > 1) {
    g[kLeft].rightCols(w - 1) = map.leftCols(w - 1) - map.rightCols(w - 1);
    g[kRight].leftCols(w - 1) = map.rightCols(w - 1) - map.leftCols(w - 1);
  }
  if (h > 1) {
    g[kUp].bottomRows(h - 1) = map.topRows(h - 1) - map.bottomRows(h - 1);
    g[kDown].topRows(h - 1) = map.bottomRows(h - 1) - map.topRows(h - 1);
  }
  return g;
}

/// Adjoint of grad4: maps a gradient w.r.t. the field back onto the map.
Grid grad4_adjoint(const GradientField& upstream);

/// Cosine similarity of two 4-vectors; 1 if both are zero, 0 if exactly one is.
double cosine_similarity4(const std::array<double, 4>& a, const std::array<double, 4>& b);

/// Mean over cells of (1 - cosine similarity) between the 4-direction gradients.
LossGrad loss_gra(const Grid& pred, const Grid& psi);

struct ConLoss {
  double value = 0.0;
  ParamTree<double> grad;   // w.r.t. the local parameters; other terms held constant
  bool degenerate = false;  // denominator below 1e-12, value forced to 0
};

/// ||local - global|| / sum_i ||local - prev_i||. Empty `prev_locals` (first round) gives 0.
ConLoss loss_con(const ParamTree<double>& local, const ParamTree<double>& global,
                 const std::vector<ParamTree<double>>& prev_locals);

struct LossWeights {
  double mu1 = 1.0;
  double mu2 = 0.1;
  void validate() const;
};

inline double loss_total(double gra, double con, const LossWeights& w) { return w.mu1 * gra + w.mu2 * con; }

}  // namespace pidrme
