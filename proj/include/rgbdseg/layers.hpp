#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rgbdseg/tensor.hpp"

namespace rgbdseg {

/// Filter bank: kernels are out x in x k x k, cross-correlated (no flip).
struct ConvLayerParams {
  Tensor kernels;
  Tensor bias;
  Tensor grad_kernels;
  Tensor grad_bias;

  static ConvLayerParams zeros(std::size_t out_channels, std::size_t in_channels,
                               std::size_t kernel);
  /// Uniform in +-1/sqrt(fan_in).
  static ConvLayerParams uniform(std::size_t out_channels, std::size_t in_channels,
                                 std::size_t kernel, std::mt19937_64& rng);

  std::size_t out_channels() const { return kernels.dim(0); }
  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t kernel_size() const { return kernels.dim(2); }
  void zero_grad();
};

struct LinearLayerParams {
  Tensor weight;  // out x in
  Tensor bias;    // out
  Tensor grad_weight;
  Tensor grad_bias;

  static LinearLayerParams zeros(std::size_t out, std::size_t in);
  static LinearLayerParams uniform(std::size_t out, std::size_t in, std::mt19937_64& rng);

  std::size_t out_features() const { return weight.dim(0); }
  std::size_t in_features() const { return weight.dim(1); }
  void zero_grad();
};

enum class Padding { same, valid };

enum class InputGrad { compute, skip };

Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& params, Padding padding);

/// Returns the gradient with respect to `input` (empty when `input_grad` is
/// skip) and accumulates kernel and bias gradients into `params`.
Tensor conv2d_backward(const Tensor& input, ConvLayerParams& params, const Tensor& grad_output,
                       Padding padding, InputGrad input_grad = InputGrad::compute);

struct PoolIndices {
  Shape input_shape;
  std::vector<std::uint32_t> argmax;  // flat input offset per output element
};

struct PoolResult {
  Tensor output;
  PoolIndices indices;
};

/// Non-overlapping 2x2 max pooling. Ties go to the first element in
/// row-major window order.
PoolResult maxpool2x2_forward(const Tensor& input);
Tensor maxpool2x2_backward(const PoolIndices& indices, const Tensor& grad_output);

Tensor tanh_forward(const Tensor& input);
void tanh_forward_inplace(Tensor& t);
/// grad_input = (1 - y^2) * grad_output, with y the forward output.
Tensor tanh_backward(const Tensor& output, const Tensor& grad_output);

Tensor linear_forward(const Tensor& input, const LinearLayerParams& params);
Tensor linear_backward(const Tensor& input, LinearLayerParams& params, const Tensor& grad_output);

/// Column-batched affine map: input is in x n, output out x n.
Tensor linear_forward_batch(const Tensor& input, const LinearLayerParams& params);

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad_logits;
};

/// -log softmax(logits)[target], evaluated with max subtraction.
LossAndGrad softmax_nll(const Tensor& logits, std::size_t target);

/// Softmax over the K values of `logits`, written into `out`.
void softmax(std::span<const double> logits, std::span<double> out);

Tensor upsample_nearest(const Tensor& input, std::size_t factor);
/// Adjoint of upsample_nearest: sums each factor x factor block.
Tensor upsample_nearest_backward(const Tensor& grad_output, std::size_t factor);

Tensor concat_channels(std::span<const Tensor> inputs);

}  // namespace rgbdseg
