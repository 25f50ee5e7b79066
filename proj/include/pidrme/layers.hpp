#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pidrme/error.hpp"
#include "pidrme/tensor.hpp"

namespace pidrme {

enum class LayerKind { Conv, LeakyRelu, Upsample, Sigmoid };

/// One layer of a feed-forward stack. Convolutions are always 3x3 with zero padding 1.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  Index in_channels = 0;
  Index out_channels = 0;
  Index stride = 1;
  double slope = 0.2;

  static LayerSpec conv(Index in, Index out, Index stride = 1) {
    if (in < 1 || out < 1 || (stride != 1 && stride != 2)) {
      throw ShapeError("conv: need in, out >= 1 and stride in {1, 2}");
    }
    return {LayerKind::Conv, in, out, stride, 0.0};
  }
  static LayerSpec leaky_relu(double slope = 0.2) { return {LayerKind::LeakyRelu, 0, 0, 1, slope}; }
  static LayerSpec upsample() { return {LayerKind::Upsample, 0, 0, 1, 0.0}; }
  static LayerSpec sigmoid() { return {LayerKind::Sigmoid, 0, 0, 1, 0.0}; }

  bool has_params() const { return kind == LayerKind::Conv; }
};

inline constexpr Index kKernel = 3;
inline constexpr Index kKernelArea = kKernel * kKernel;

/// Weight is (out, in*9) with column index ci*9 + kr*3 + kc.
template <typename Scalar>
struct ConvParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix weight;
  Vector bias;

  static ConvParams zeros(Index in, Index out) {
    return {Matrix::Zero(out, in * kKernelArea), Vector::Zero(out)};
  }
  Index in_channels() const { return weight.cols() / kKernelArea; }
  Index out_channels() const { return weight.rows(); }
  Index size() const { return weight.size() + bias.size(); }
};

/// Ordered parameters of every conv layer in a stack.
template <typename Scalar>
struct ParamTree {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<ConvParams<Scalar>> convs;

  Index size() const {
    Index n = 0;
    for (const auto& c : convs) n += c.size();
    return n;
  }

  Vector flatten() const {
    Vector flat(size());
    Index at = 0;
    for (const auto& c : convs) {
      flat.segment(at, c.weight.size()) = c.weight.template reshaped<Eigen::RowMajor>();
      at += c.weight.size();
      flat.segment(at, c.bias.size()) = c.bias;
      at += c.bias.size();
    }
    return flat;
  }

  void assign(const Vector& flat) {
    if (flat.size() != size()) {
      throw ShapeError("param assign: expected " + std::to_string(size()) + " values, got " +
                       std::to_string(flat.size()));
    }
    Index at = 0;
    for (auto& c : convs) {
      c.weight.template reshaped<Eigen::RowMajor>() = flat.segment(at, c.weight.size());
      at += c.weight.size();
      c.bias = flat.segment(at, c.bias.size());
      at += c.bias.size();
    }
  }

  ParamTree zeros_like() const {
    ParamTree z;
    z.convs.reserve(convs.size());
    for (const auto& c : convs) z.convs.push_back(ConvParams<Scalar>::zeros(c.in_channels(), c.out_channels()));
    return z;
  }

  bool same_shape(const ParamTree& other) const {
    if (convs.size() != other.convs.size()) return false;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      if (convs[i].weight.rows() != other.convs[i].weight.rows() ||
          convs[i].weight.cols() != other.convs[i].weight.cols()) {
        return false;
      }
    }
    return true;
  }

  ParamTree& operator+=(const ParamTree& other) {
    require_same_shape(other);
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].weight += other.convs[i].weight;
      convs[i].bias += other.convs[i].bias;
    }
    return *this;
  }

  ParamTree& operator*=(Scalar s) {
    for (auto& c : convs) {
      c.weight *= s;
      c.bias *= s;
    }
    return *this;
  }

  void require_same_shape(const ParamTree& other) const {
    if (!same_shape(other)) throw ShapeError("parameter trees have different shapes");
  }

  friend bool operator==(const ParamTree& a, const ParamTree& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.convs.size(); ++i) {
      if (a.convs[i].weight != b.convs[i].weight || a.convs[i].bias != b.convs[i].bias) return false;
    }
    return true;
  }
};

template <typename Scalar>
Scalar l2_distance(const ParamTree<Scalar>& a, const ParamTree<Scalar>& b) {
  a.require_same_shape(b);
  Scalar sq = 0;
  for (std::size_t i = 0; i < a.convs.size(); ++i) {
    sq += (a.convs[i].weight - b.convs[i].weight).squaredNorm();
    sq += (a.convs[i].bias - b.convs[i].bias).squaredNorm();
  }
  return std::sqrt(sq);
}

/// What layer_backward needs from the matching forward call.
template <typename Scalar>
struct LayerCache {
  LayerKind kind = LayerKind::Conv;
  Index in_channels = 0;
  Index in_height = 0;
  Index in_width = 0;
  typename Tensor<Scalar>::Matrix columns;  // conv: im2col of the input
  Tensor<Scalar> input;                     // leaky relu: pre-activation
  Tensor<Scalar> output;                    // sigmoid: activation
};

namespace detail {

inline Index conv_out_extent(Index in, Index stride) { return (in + 2 - kKernel) / stride + 1; }

template <typename Scalar>
typename Tensor<Scalar>::Matrix im2col(const Tensor<Scalar>& x, Index stride) {
  const Index oh = conv_out_extent(x.height(), stride);
  const Index ow = conv_out_extent(x.width(), stride);
  typename Tensor<Scalar>::Matrix cols = Tensor<Scalar>::Matrix::Zero(x.channels() * kKernelArea, oh * ow);
  for (Index ci = 0; ci < x.channels(); ++ci) {
    const Scalar* src = x.data().row(ci).data();
    for (Index kr = 0; kr < kKernel; ++kr) {
      for (Index kc = 0; kc < kKernel; ++kc) {
        Scalar* dst = cols.row(ci * kKernelArea + kr * kKernel + kc).data();
        for (Index r = 0; r < oh; ++r) {
          const Index ir = r * stride + kr - 1;
          if (ir < 0 || ir >= x.height()) continue;
          for (Index c = 0; c < ow; ++c) {
            const Index ic = c * stride + kc - 1;
            if (ic < 0 || ic >= x.width()) continue;
            dst[r * ow + c] = src[ir * x.width() + ic];
          }
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
Tensor<Scalar> col2im(const typename Tensor<Scalar>::Matrix& cols, Index channels, Index height,
                      Index width, Index stride) {
  const Index oh = conv_out_extent(height, stride);
  const Index ow = conv_out_extent(width, stride);
  Tensor<Scalar> x(channels, height, width);
  for (Index ci = 0; ci < channels; ++ci) {
    Scalar* dst = x.data().row(ci).data();
    for (Index kr = 0; kr < kKernel; ++kr) {
      for (Index kc = 0; kc < kKernel; ++kc) {
        const Scalar* src = cols.row(ci * kKernelArea + kr * kKernel + kc).data();
        for (Index r = 0; r < oh; ++r) {
          const Index ir = r * stride + kr - 1;
          if (ir < 0 || ir >= height) continue;
          for (Index c = 0; c < ow; ++c) {
            const Index ic = c * stride + kc - 1;
            if (ic < 0 || ic >= width) continue;
            dst[ir * width + ic] += src[r * ow + c];
          }
        }
      }
    }
  }
  return x;
}

}  // namespace detail

template <typename Scalar>
std::pair<Tensor<Scalar>, LayerCache<Scalar>> layer_forward(const LayerSpec& spec,
                                                            const ConvParams<Scalar>* params,
                                                            const Tensor<Scalar>& input) {
  LayerCache<Scalar> cache;
  cache.kind = spec.kind;
  cache.in_channels = input.channels();
  cache.in_height = input.height();
  cache.in_width = input.width();

  switch (spec.kind) {
    case LayerKind::Conv: {
      if (params == nullptr) throw ShapeError("conv layer called without parameters");
      if (input.channels() != spec.in_channels || params->in_channels() != spec.in_channels ||
          params->out_channels() != spec.out_channels) {
        throw ShapeError("conv: expected " + std::to_string(spec.in_channels) + " input channels, got " +
                         input.shape_string());
      }
      cache.columns = detail::im2col(input, spec.stride);
      Tensor<Scalar> out(spec.out_channels, detail::conv_out_extent(input.height(), spec.stride),
                         detail::conv_out_extent(input.width(), spec.stride));
      out.data().noalias() = params->weight * cache.columns;
      out.data().colwise() += params->bias;
      return {std::move(out), std::move(cache)};
    }
    case LayerKind::LeakyRelu: {
      Tensor<Scalar> out = input;
      const Scalar slope = static_cast<Scalar>(spec.slope);
      out.data() = input.data().unaryExpr([slope](Scalar v) { return v > 0 ? v : slope * v; });
      cache.input = input;
      return {std::move(out), std::move(cache)};
    }
    case LayerKind::Upsample: {
      Tensor<Scalar> out(input.channels(), input.height() * 2, input.width() * 2);
      for (Index c = 0; c < input.channels(); ++c) {
        for (Index r = 0; r < out.height(); ++r) {
          for (Index col = 0; col < out.width(); ++col) out(c, r, col) = input(c, r / 2, col / 2);
        }
      }
      return {std::move(out), std::move(cache)};
    }
    case LayerKind::Sigmoid: {
      Tensor<Scalar> out = input;
      out.data() = input.data().unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
      cache.output = out;
      return {std::move(out), std::move(cache)};
    }
  }
  throw ShapeError("unknown layer kind");
}

/// Returns the gradient w.r.t. the layer input; conv parameter gradients are
/// accumulated into `grad_params` when it is non-null.
template <typename Scalar>
Tensor<Scalar> layer_backward(const LayerSpec& spec, const ConvParams<Scalar>* params,
                              const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                              ConvParams<Scalar>* grad_params) {
  if (cache.kind != spec.kind) throw ShapeError("layer_backward: cache from a different layer kind");
  switch (spec.kind) {
    case LayerKind::Conv: {
      if (params == nullptr) throw ShapeError("conv layer called without parameters");
      if (grad_out.channels() != spec.out_channels || grad_out.height() * grad_out.width() != cache.columns.cols()) {
        throw ShapeError("conv backward: gradient shape " + grad_out.shape_string() + " does not match cache");
      }
      if (grad_params != nullptr) {
        grad_params->weight.noalias() += grad_out.data() * cache.columns.transpose();
        grad_params->bias += grad_out.data().rowwise().sum();
      }
      typename Tensor<Scalar>::Matrix dcols = params->weight.transpose() * grad_out.data();
      return detail::col2im<Scalar>(dcols, cache.in_channels, cache.in_height, cache.in_width, spec.stride);
    }
    case LayerKind::LeakyRelu: {
      if (!grad_out.same_shape(cache.input)) throw ShapeError("leaky relu backward: shape mismatch");
      Tensor<Scalar> g = grad_out;
      const Scalar slope = static_cast<Scalar>(spec.slope);
      g.data() = grad_out.data().binaryExpr(cache.input.data(),
                                            [slope](Scalar go, Scalar x) { return x > 0 ? go : slope * go; });
      return g;
    }
    case LayerKind::Upsample: {
      if (grad_out.height() != 2 * cache.in_height || grad_out.width() != 2 * cache.in_width) {
        throw ShapeError("upsample backward: shape mismatch");
      }
      Tensor<Scalar> g(cache.in_channels, cache.in_height, cache.in_width);
      for (Index c = 0; c < grad_out.channels(); ++c) {
        for (Index r = 0; r < grad_out.height(); ++r) {
          for (Index col = 0; col < grad_out.width(); ++col) g(c, r / 2, col / 2) += grad_out(c, r, col);
        }
      }
      return g;
    }
    case LayerKind::Sigmoid: {
      if (!grad_out.same_shape(cache.output)) throw ShapeError("sigmoid backward: shape mismatch");
      Tensor<Scalar> g = grad_out;
      g.data() = grad_out.data().binaryExpr(cache.output.data(),
                                            [](Scalar go, Scalar y) { return go * y * (Scalar(1) - y); });
      return g;
    }
  }
  throw ShapeError("unknown layer kind");
}

/// Kaiming-uniform (leaky-relu gain) weights, zero biases.
template <typename Scalar>
ConvParams<Scalar> kaiming_uniform(const LayerSpec& spec, std::mt19937_64& rng, double slope = 0.2) {
  ConvParams<Scalar> p = ConvParams<Scalar>::zeros(spec.in_channels, spec.out_channels);
  const double fan_in = static_cast<double>(spec.in_channels * kKernelArea);
  const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
  const double bound = gain * std::sqrt(3.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = static_cast<Scalar>(dist(rng));
  return p;
}

}  // namespace pidrme
