#include "pidrme/losses.hpp"

#include <cmath>

namespace pidrme {

LossGrad loss_rec(const Grid& pred, const Grid& truth) {
  require_same_extent(pred, truth, "loss_rec");
  const double cells = static_cast<double>(pred.size());
  const Grid diff = pred - truth;
  const double norm = diff.norm();
  LossGrad out;
  out.value = norm / cells;
  out.grad = norm > 0.0 ? Grid(diff / (cells * norm)) : Grid(Grid::Zero(pred.rows(), pred.cols()));
  return out;
}

Grid grad4_adjoint(const GradientField& up) {
  const Index h = up[0].rows();
  const Index w = up[0].cols();
  Grid m = Grid::Zero(h, w);
  if (w > 1) {
    // left[r, c] = m[r, c-1] - m[r, c] for c >= 1
    m.leftCols(w - 1) += up[kLeft].rightCols(w - 1);
    m.rightCols(w - 1) -= up[kLeft].rightCols(w - 1);
    // right[r, c] = m[r, c+1] - m[r, c] for c <= w-2
    m.rightCols(w - 1) += up[kRight].leftCols(w - 1);
    m.leftCols(w - 1) -= up[kRight].leftCols(w - 1);
  }
  if (h > 1) {
    m.topRows(h - 1) += up[kUp].bottomRows(h - 1);
    m.bottomRows(h - 1) -= up[kUp].bottomRows(h - 1);
    m.bottomRows(h - 1) += up[kDown].topRows(h - 1);
    m.topRows(h - 1) -= up[kDown].topRows(h - 1);
  }
  return m;
}

double cosine_similarity4(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

LossGrad loss_gra(const Grid& pred, const Grid& psi) {
  require_same_extent(pred, psi, "loss_gra");
  const GradientField gp = grad4(pred);
  const GradientField gt = grad4(psi);
  const double cells = static_cast<double>(pred.size());
  GradientField up;
  for (auto& d : up) d = Grid::Zero(pred.rows(), pred.cols());

  double total = 0.0;
  for (Index r = 0; r < pred.rows(); ++r) {
    for (Index c = 0; c < pred.cols(); ++c) {
      std::array<double, 4> a{};
      std::array<double, 4> b{};
      for (std::size_t k = 0; k < 4; ++k) {
        a[k] = gp[k](r, c);
        b[k] = gt[k](r, c);
      }
      const double cs = cosine_similarity4(a, b);
      total += 1.0 - cs;

      double na = 0.0;
      double nb = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        na += a[k] * a[k];
        nb += b[k] * b[k];
      }
      if (na == 0.0 || nb == 0.0) continue;  // constant in a, zero gradient
      const double la = std::sqrt(na);
      const double lb = std::sqrt(nb);
      for (std::size_t k = 0; k < 4; ++k) {
        const double dcs = b[k] / (la * lb) - cs * a[k] / na;
        up[k](r, c) = -dcs / cells;
      }
    }
  }
  return {total / cells, grad4_adjoint(up)};
}

ConLoss loss_con(const ParamTree<double>& local, const ParamTree<double>& global,
                 const std::vector<ParamTree<double>>& prev_locals) {
  local.require_same_shape(global);
  for (const auto& p : prev_locals) local.require_same_shape(p);

  ConLoss out;
  out.grad = local.zeros_like();
  if (prev_locals.empty()) return out;

  using Vec = ParamTree<double>::Vector;
  const Vec x = local.flatten();
  const Vec to_global = x - global.flatten();
  const double numerator = to_global.norm();

  double denominator = 0.0;
  Vec denom_grad = Vec::Zero(x.size());
  for (const auto& p : prev_locals) {
    const Vec d = x - p.flatten();
    const double n = d.norm();
    denominator += n;
    if (n > 0.0) denom_grad += d / n;
  }
  if (denominator < 1e-12) {
    out.degenerate = true;
    return out;
  }
  out.value = numerator / denominator;
  Vec g = -(numerator / (denominator * denominator)) * denom_grad;
  if (numerator > 0.0) g += to_global / (numerator * denominator);
  out.grad.assign(g);
  return out;
}

void LossWeights::validate() const {
  if (!std::isfinite(mu1) || !std::isfinite(mu2) || mu1 < 0 || mu2 < 0) {
    throw ValidationError("loss weights mu1, mu2 must be finite and >= 0");
  }
}

}  // namespace pidrme
