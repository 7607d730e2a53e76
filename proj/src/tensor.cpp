#include "rgbdseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace rgbdseg {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (shape_size(shape_) != values_.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape_) + " does not match " +
                     std::to_string(values_.size()) + " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(shape_));
  }
  return shape_[axis];
}

std::span<double> Tensor::channel(std::size_t c) {
  const std::size_t plane = shape_[1] * shape_[2];
  return {values_.data() + c * plane, plane};
}

std::span<const double> Tensor::channel(std::size_t c) const {
  const std::size_t plane = shape_[1] * shape_[2];
  return {values_.data() + c * plane, plane};
}

Tensor Tensor::slice_channels(std::size_t first, std::size_t count) const {
  require_rank(*this, 3, "slice_channels");
  if (first + count > shape_[0]) {
    throw ShapeError("slice_channels: channels [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") out of " + shape_string(shape_));
  }
  const std::size_t plane = shape_[1] * shape_[2];
  Tensor out({count, shape_[1], shape_[2]});
  std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(first * plane), count * plane,
              out.values_.begin());
  return out;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size()) {
    throw ShapeError("reshaped: " + shape_string(shape_) + " cannot become " + shape_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const noexcept {
  // Summing propagates NaN/Inf and vectorizes, unlike a per-element branch.
  double acc = 0.0;
  for (double v : values_) acc += v * 0.0;
  return acc == 0.0;
}

void Tensor::require_finite(std::string_view what) const {
  if (!all_finite()) {
    throw NumericError(std::string(what) + ": non-finite value in tensor " + shape_string(shape_));
  }
}

void require_shape(const Tensor& t, const Shape& expected, std::string_view what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                     shape_string(t.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, std::string_view what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_string(t.shape()));
  }
}

}  // namespace rgbdseg
