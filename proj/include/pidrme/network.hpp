#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pidrme/layers.hpp"

namespace pidrme {

/// A feed-forward stack of layers. Stateless; parameters live in a ParamTree
/// passed to every call so that parameter sets can be copied between clients.
template <typename Scalar>
class Sequential {
 public:
  using TensorT = Tensor<Scalar>;
  using Params = ParamTree<Scalar>;
  using Trace = std::vector<LayerCache<Scalar>>;

  Sequential() = default;
  explicit Sequential(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
    std::size_t next = 0;
    for (const auto& l : layers_) slots_.push_back(l.has_params() ? std::optional<std::size_t>(next++) : std::nullopt);
    conv_count_ = next;
  }

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t conv_count() const { return conv_count_; }
  std::optional<std::size_t> conv_slot(std::size_t layer) const { return slots_.at(layer); }

  Params zero_params() const {
    Params p;
    for (const auto& l : layers_) {
      if (l.has_params()) p.convs.push_back(ConvParams<Scalar>::zeros(l.in_channels, l.out_channels));
    }
    return p;
  }

  Params init_params(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    Params p;
    for (const auto& l : layers_) {
      if (l.has_params()) p.convs.push_back(kaiming_uniform<Scalar>(l, rng));
    }
    return p;
  }

  TensorT forward(const Params& params, const TensorT& input, Trace* trace = nullptr) const {
    return forward_from(params, 0, input, trace);
  }

  /// Runs layers [first, end) on `input`, which must be the input of layer `first`.
  TensorT forward_from(const Params& params, std::size_t first, const TensorT& input, Trace* trace = nullptr) const {
    check_params(params);
    if (trace != nullptr) trace->clear();
    TensorT x = input;
    for (std::size_t i = first; i < layers_.size(); ++i) {
      auto [y, cache] = layer_forward(layers_[i], param_ptr(params, i), x);
      if (trace != nullptr) trace->push_back(std::move(cache));
      x = std::move(y);
    }
    return x;
  }

  /// Inputs of every layer plus the final output (size = layers + 1).
  std::vector<TensorT> activations(const Params& params, const TensorT& input) const {
    check_params(params);
    std::vector<TensorT> acts{input};
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      acts.push_back(layer_forward(layers_[i], param_ptr(params, i), acts.back()).first);
    }
    return acts;
  }

  /// Backpropagates through a full-stack trace. Accumulates into `grads` if given.
  TensorT backward(const Params& params, const Trace& trace, const TensorT& grad_out, Params* grads) const {
    check_params(params);
    if (trace.size() != layers_.size()) throw ShapeError("backward: trace does not cover every layer");
    if (grads != nullptr) grads->require_same_shape(params);
    TensorT g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      ConvParams<Scalar>* gp = nullptr;
      if (grads != nullptr && slots_[i]) gp = &grads->convs[*slots_[i]];
      g = layer_backward(layers_[i], param_ptr(params, i), trace[i], g, gp);
    }
    return g;
  }

 private:
  const ConvParams<Scalar>* param_ptr(const Params& params, std::size_t layer) const {
    return slots_[layer] ? &params.convs[*slots_[layer]] : nullptr;
  }

  void check_params(const Params& params) const {
    if (params.convs.size() != conv_count_) {
      throw ShapeError("network has " + std::to_string(conv_count_) + " conv layers but got " +
                       std::to_string(params.convs.size()) + " parameter blocks");
    }
  }

  std::vector<LayerSpec> layers_;
  std::vector<std::optional<std::size_t>> slots_;
  std::size_t conv_count_ = 0;
};

}  // namespace pidrme
