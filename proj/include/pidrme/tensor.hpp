#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "pidrme/error.hpp"
#include "pidrme/units.hpp"

namespace pidrme {

/// Channel-major feature map of shape (channels, height, width).
///
/// Storage is a row-major (channels x height*width) matrix so that each channel
/// is one contiguous row; convolution then reduces to a single GEMM per layer.
template <typename Scalar>
class Tensor {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ChannelMap = Eigen::Map<Matrix>;
  using ConstChannelMap = Eigen::Map<const Matrix>;

  Tensor() = default;
  Tensor(Index channels, Index height, Index width)
      : height_(height), width_(width), data_(Matrix::Zero(channels, height * width)) {}

  static Tensor from_grid(const GridT<Scalar>& grid) {
    Tensor t(1, grid.rows(), grid.cols());
    t.channel(0) = grid;
    return t;
  }

  Index channels() const { return data_.rows(); }
  Index height() const { return height_; }
  Index width() const { return width_; }
  Index size() const { return data_.size(); }

  Matrix& data() { return data_; }
  const Matrix& data() const { return data_; }

  Scalar& operator()(Index c, Index r, Index col) { return data_(c, r * width_ + col); }
  Scalar operator()(Index c, Index r, Index col) const { return data_(c, r * width_ + col); }

  ChannelMap channel(Index c) { return ChannelMap(data_.row(c).data(), height_, width_); }
  ConstChannelMap channel(Index c) const { return ConstChannelMap(data_.row(c).data(), height_, width_); }

  bool same_shape(const Tensor& other) const {
    return channels() == other.channels() && height_ == other.height_ && width_ == other.width_;
  }

  std::string shape_string() const {
    return "(" + std::to_string(channels()) + ", " + std::to_string(height_) + ", " +
           std::to_string(width_) + ")";
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  Index height_ = 0;
  Index width_ = 0;
  Matrix data_;
};

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat: spatial mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor<Scalar> out(a.channels() + b.channels(), a.height(), a.width());
  out.data().topRows(a.channels()) = a.data();
  out.data().bottomRows(b.channels()) = b.data();
  return out;
}

/// Inverse of concat_channels: first `leading` channels, then the rest.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& t, Index leading) {
  if (leading < 0 || leading > t.channels()) {
    throw ShapeError("split: cannot take " + std::to_string(leading) + " channels from " +
                     t.shape_string());
  }
  Tensor<Scalar> a(leading, t.height(), t.width());
  Tensor<Scalar> b(t.channels() - leading, t.height(), t.width());
  a.data() = t.data().topRows(leading);
  b.data() = t.data().bottomRows(t.channels() - leading);
  return {std::move(a), std::move(b)};
}

}  // namespace pidrme
