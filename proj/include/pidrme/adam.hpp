#pragma once

#include <cmath>
#include <cstdint>

#include "pidrme/layers.hpp"

namespace pidrme {

template <typename Scalar>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  ParamTree<Scalar> m;
  ParamTree<Scalar> v;

  static AdamState for_params(const ParamTree<Scalar>& params, double lr) {
    AdamState s;
    s.lr = lr;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
  }
};

/// Bias-corrected Adam update of `params` in place.
template <typename Scalar>
void adam_step(ParamTree<Scalar>& params, const ParamTree<Scalar>& grads, AdamState<Scalar>& state) {
  params.require_same_shape(grads);
  if (state.m.convs.empty() && !params.convs.empty()) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  params.require_same_shape(state.m);
  ++state.step;
  const Scalar b1 = static_cast<Scalar>(state.beta1);
  const Scalar b2 = static_cast<Scalar>(state.beta2);
  const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.step));
  const Scalar lr = static_cast<Scalar>(state.lr);
  const Scalar eps = static_cast<Scalar>(state.eps);

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.convs.size(); ++i) {
    update(params.convs[i].weight, grads.convs[i].weight, state.m.convs[i].weight, state.v.convs[i].weight);
    update(params.convs[i].bias, grads.convs[i].bias, state.m.convs[i].bias, state.v.convs[i].bias);
  }
}

}  // namespace pidrme
