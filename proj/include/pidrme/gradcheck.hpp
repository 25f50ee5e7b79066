#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "pidrme/network.hpp"

namespace pidrme {

struct GradCheckOptions {
  double eps = 1e-4;
  // 0 checks every entry; otherwise at most this many evenly spaced entries
  // per weight matrix and per bias vector.
  Index max_per_tensor = 0;
  // Denominator floor for the relative error, so that near-zero gradients are
  // compared absolutely.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  Index checked = 0;
  // Probes whose +eps and -eps evaluations fall in different LeakyReLU
  // regions; the central difference is meaningless across a kink.
  Index skipped = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double diff = std::abs(analytic - numeric);
  if (diff == 0.0) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

inline std::vector<Index> probe_indices(Index n, Index max_count) {
  std::vector<Index> out;
  if (n == 0) return out;
  if (max_count <= 0 || n <= max_count) {
    for (Index i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  for (Index k = 0; k < max_count; ++k) out.push_back(k * (n - 1) / (max_count - 1 > 0 ? max_count - 1 : 1));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

/// Loss value plus the activation region of every piecewise-linear unit.
template <typename Scalar>
struct Probe {
  Scalar value{};
  std::vector<bool> regions;
};

/// Appends the sign pattern of every LeakyReLU pre-activation in a trace.
template <typename Scalar>
void append_regions(const std::vector<LayerCache<Scalar>>& trace, std::vector<bool>& out) {
  for (const auto& c : trace) {
    if (c.kind != LayerKind::LeakyRelu) continue;
    const auto& x = c.input.data();
    for (Index i = 0; i < x.size(); ++i) out.push_back(x.data()[i] > 0);
  }
}

template <typename Scalar>
using ProbeFn = std::function<Probe<Scalar>(const ParamTree<Scalar>&, std::size_t)>;

/// Compares `analytic` against central differences of `loss` at `params`.
///
/// `loss_after` is called with the perturbed tree and the index of the conv
/// block that was perturbed, so callers can skip recomputing earlier layers.
template <typename Scalar>
GradCheckResult finite_diff_check(const ProbeFn<Scalar>& loss_after, ParamTree<Scalar> params,
                                  const ParamTree<Scalar>& analytic, const GradCheckOptions& opts = {}) {
  params.require_same_shape(analytic);
  GradCheckResult result;
  const Scalar eps = static_cast<Scalar>(opts.eps);

  auto probe = [&](std::size_t block, Scalar& value, Scalar grad) {
    const Scalar saved = value;
    value = saved + eps;
    const Probe<Scalar> up = loss_after(params, block);
    value = saved - eps;
    const Probe<Scalar> down = loss_after(params, block);
    value = saved;
    if (up.regions != down.regions) {
      ++result.skipped;
      return;
    }
    const double numeric = static_cast<double>((up.value - down.value) / (Scalar(2) * eps));
    const double err = relative_error(static_cast<double>(grad), numeric, opts.floor);
    ++result.checked;
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_analytic = static_cast<double>(grad);
      result.worst_numeric = numeric;
    }
  };

  for (std::size_t b = 0; b < params.convs.size(); ++b) {
    auto& w = params.convs[b].weight;
    for (Index i : detail::probe_indices(w.size(), opts.max_per_tensor)) {
      probe(b, w.data()[i], analytic.convs[b].weight.data()[i]);
    }
    auto& bias = params.convs[b].bias;
    for (Index i : detail::probe_indices(bias.size(), opts.max_per_tensor)) {
      probe(b, bias.data()[i], analytic.convs[b].bias.data()[i]);
    }
  }
  return result;
}

/// Loss on a network output: returns (value, d value / d output).
template <typename Scalar>
using OutputLoss = std::function<std::pair<Scalar, Tensor<Scalar>>(const Tensor<Scalar>&)>;

/// Gradient check of a Sequential stack under an output loss. Perturbations of
/// conv block k re-run the stack from that layer only.
template <typename Scalar>
GradCheckResult finite_diff_check(const Sequential<Scalar>& net, const ParamTree<Scalar>& params,
                                  const Tensor<Scalar>& input, const OutputLoss<Scalar>& loss_fn,
                                  const GradCheckOptions& opts = {}) {
  typename Sequential<Scalar>::Trace trace;
  const Tensor<Scalar> out = net.forward(params, input, &trace);
  ParamTree<Scalar> grads = params.zeros_like();
  net.backward(params, trace, loss_fn(out).second, &grads);

  const auto acts = net.activations(params, input);
  std::vector<std::size_t> first_layer(net.conv_count());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    if (auto slot = net.conv_slot(l)) first_layer[*slot] = l;
  }
  ProbeFn<Scalar> loss_after = [&](const ParamTree<Scalar>& p, std::size_t block) {
    const std::size_t l = first_layer[block];
    typename Sequential<Scalar>::Trace t;
    Probe<Scalar> probe;
    probe.value = loss_fn(net.forward_from(p, l, acts[l], &t)).first;
    append_regions(t, probe.regions);
    return probe;
  };
  return finite_diff_check<Scalar>(loss_after, params, grads, opts);
}

/// Half squared error against a fixed target, a convenient smooth test loss.
template <typename Scalar>
OutputLoss<Scalar> half_squared_error(Tensor<Scalar> target) {
  return [target = std::move(target)](const Tensor<Scalar>& out) {
    if (!out.same_shape(target)) throw ShapeError("loss: output " + out.shape_string() + " vs target " + target.shape_string());
    Tensor<Scalar> grad = out;
    grad.data() = out.data() - target.data();
    return std::make_pair(Scalar(0.5) * grad.data().squaredNorm(), grad);
  };
}

}  // namespace pidrme
