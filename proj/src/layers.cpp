#include "rgbdseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace rgbdseg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Upper bound on the im2col buffer, in doubles.
constexpr std::size_t kColumnBudget = std::size_t{1} << 19;

struct ConvGeometry {
  std::size_t in_channels, in_h, in_w;
  std::size_t out_channels, out_h, out_w;
  std::size_t kernel;
  std::ptrdiff_t pad;

  std::size_t patch() const { return in_channels * kernel * kernel; }
};

ConvGeometry conv_geometry(const Tensor& input, const ConvLayerParams& params, Padding padding,
                           const char* what) {
  require_rank(input, 3, what);
  require_rank(params.kernels, 4, what);
  const std::size_t k = params.kernel_size();
  if (params.kernels.dim(3) != k) {
    throw ShapeError(std::string(what) + ": kernels must be square, got " +
                     shape_string(params.kernels.shape()));
  }
  if (input.dim(0) != params.in_channels()) {
    throw ShapeError(std::string(what) + ": input has " + std::to_string(input.dim(0)) +
                     " channels, kernels expect " + std::to_string(params.in_channels()));
  }
  require_shape(params.bias, {params.out_channels()}, what);
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), params.out_channels(), 0, 0, k, 0};
  if (padding == Padding::same) {
    if (k % 2 == 0) throw ShapeError(std::string(what) + ": same padding needs an odd kernel");
    g.pad = static_cast<std::ptrdiff_t>(k / 2);
    g.out_h = g.in_h;
    g.out_w = g.in_w;
  } else {
    if (g.in_h < k || g.in_w < k) {
      throw ShapeError(std::string(what) + ": input " + shape_string(input.shape()) +
                       " smaller than kernel " + std::to_string(k));
    }
    g.out_h = g.in_h - k + 1;
    g.out_w = g.in_w - k + 1;
  }
  return g;
}

std::size_t band_rows(const ConvGeometry& g) {
  const std::size_t per_row = g.patch() * g.out_w;
  return std::clamp<std::size_t>(kColumnBudget / std::max<std::size_t>(per_row, 1), 1, g.out_h);
}

// Fills `col` (patch x rows*out_w, row-major) for output rows [y0, y0+rows).
void im2col(const double* input, const ConvGeometry& g, std::size_t y0, std::size_t rows,
            double* col) {
  const std::size_t n = rows * g.out_w;
  const auto in_h = static_cast<std::ptrdiff_t>(g.in_h);
  const auto in_w = static_cast<std::ptrdiff_t>(g.in_w);
  const auto out_w = static_cast<std::ptrdiff_t>(g.out_w);
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const double* plane = input + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        double* dst = col + ((c * g.kernel + ky) * g.kernel + kx) * n;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - g.pad;
        // Output columns whose source column lies inside the image.
        const std::ptrdiff_t x_lo = std::clamp<std::ptrdiff_t>(-dx, 0, out_w);
        const std::ptrdiff_t x_hi = std::clamp<std::ptrdiff_t>(in_w - dx, 0, out_w);
        for (std::size_t r = 0; r < rows; ++r) {
          double* row = dst + r * g.out_w;
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y0 + r + ky) - g.pad;
          if (sy < 0 || sy >= in_h || x_lo >= x_hi) {
            std::fill_n(row, g.out_w, 0.0);
            continue;
          }
          std::fill(row, row + x_lo, 0.0);
          std::copy(plane + sy * in_w + x_lo + dx, plane + sy * in_w + x_hi + dx, row + x_lo);
          std::fill(row + x_hi, row + out_w, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, std::size_t y0, std::size_t rows,
                double* grad_input) {
  const std::size_t n = rows * g.out_w;
  const auto in_h = static_cast<std::ptrdiff_t>(g.in_h);
  const auto in_w = static_cast<std::ptrdiff_t>(g.in_w);
  const auto out_w = static_cast<std::ptrdiff_t>(g.out_w);
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    double* plane = grad_input + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const double* src = col + ((c * g.kernel + ky) * g.kernel + kx) * n;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - g.pad;
        const std::ptrdiff_t x_lo = std::clamp<std::ptrdiff_t>(-dx, 0, out_w);
        const std::ptrdiff_t x_hi = std::clamp<std::ptrdiff_t>(in_w - dx, 0, out_w);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y0 + r + ky) - g.pad;
          if (sy < 0 || sy >= in_h) continue;
          const double* row = src + r * g.out_w;
          double* dst = plane + sy * in_w + dx;
          for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) dst[x] += row[x];
        }
      }
    }
  }
}

}  // namespace

ConvLayerParams ConvLayerParams::zeros(std::size_t out_channels, std::size_t in_channels,
                                       std::size_t kernel) {
  ConvLayerParams p;
  p.kernels = Tensor({out_channels, in_channels, kernel, kernel});
  p.bias = Tensor({out_channels});
  p.grad_kernels = Tensor::zeros_like(p.kernels);
  p.grad_bias = Tensor::zeros_like(p.bias);
  return p;
}

ConvLayerParams ConvLayerParams::uniform(std::size_t out_channels, std::size_t in_channels,
                                         std::size_t kernel, std::mt19937_64& rng) {
  ConvLayerParams p = zeros(out_channels, in_channels, kernel);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel * kernel));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : p.kernels.values()) v = dist(rng);
  for (double& v : p.bias.values()) v = dist(rng);
  return p;
}

void ConvLayerParams::zero_grad() {
  if (grad_kernels.shape() != kernels.shape()) grad_kernels = Tensor(kernels.shape());
  if (grad_bias.shape() != bias.shape()) grad_bias = Tensor(bias.shape());
  grad_kernels.fill(0.0);
  grad_bias.fill(0.0);
}

LinearLayerParams LinearLayerParams::zeros(std::size_t out, std::size_t in) {
  LinearLayerParams p;
  p.weight = Tensor({out, in});
  p.bias = Tensor({out});
  p.grad_weight = Tensor::zeros_like(p.weight);
  p.grad_bias = Tensor::zeros_like(p.bias);
  return p;
}

LinearLayerParams LinearLayerParams::uniform(std::size_t out, std::size_t in,
                                             std::mt19937_64& rng) {
  LinearLayerParams p = zeros(out, in);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : p.weight.values()) v = dist(rng);
  for (double& v : p.bias.values()) v = dist(rng);
  return p;
}

void LinearLayerParams::zero_grad() {
  if (grad_weight.shape() != weight.shape()) grad_weight = Tensor(weight.shape());
  if (grad_bias.shape() != bias.shape()) grad_bias = Tensor(bias.shape());
  grad_weight.fill(0.0);
  grad_bias.fill(0.0);
}

Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& params, Padding padding) {
  const ConvGeometry g = conv_geometry(input, params, padding, "conv2d_forward");
  Tensor output({g.out_channels, g.out_h, g.out_w});
  const std::size_t plane = g.out_h * g.out_w;
  Eigen::Map<const RowMat> kernels(params.kernels.data(), static_cast<Eigen::Index>(g.out_channels),
                                   static_cast<Eigen::Index>(g.patch()));
  const std::size_t band = band_rows(g);
  std::vector<double> col(g.patch() * band * g.out_w);
  for (std::size_t y0 = 0; y0 < g.out_h; y0 += band) {
    const std::size_t rows = std::min(band, g.out_h - y0);
    const auto n = static_cast<Eigen::Index>(rows * g.out_w);
    im2col(input.data(), g, y0, rows, col.data());
    Eigen::Map<const RowMat> cols(col.data(), static_cast<Eigen::Index>(g.patch()), n);
    StridedMap out(output.data() + y0 * g.out_w, static_cast<Eigen::Index>(g.out_channels), n,
                   Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
    out.noalias() = kernels * cols;
  }
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    const double b = params.bias[o];
    for (double& v : output.channel(o)) v += b;
  }
  output.require_finite("conv2d_forward");
  return output;
}

Tensor conv2d_backward(const Tensor& input, ConvLayerParams& params, const Tensor& grad_output,
                       Padding padding, InputGrad input_grad) {
  const ConvGeometry g = conv_geometry(input, params, padding, "conv2d_backward");
  require_shape(grad_output, {g.out_channels, g.out_h, g.out_w}, "conv2d_backward grad_output");
  require_shape(params.grad_kernels, params.kernels.shape(), "conv2d_backward grad_kernels");
  require_shape(params.grad_bias, params.bias.shape(), "conv2d_backward grad_bias");

  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    double acc = 0.0;
    for (double v : grad_output.channel(o)) acc += v;
    params.grad_bias[o] += acc;
  }

  const auto out_c = static_cast<Eigen::Index>(g.out_channels);
  const auto patch = static_cast<Eigen::Index>(g.patch());
  Eigen::Map<const RowMat> kernels(params.kernels.data(), out_c, patch);
  Eigen::Map<RowMat> grad_kernels(params.grad_kernels.data(), out_c, patch);

  Tensor grad_input;
  if (input_grad == InputGrad::compute) grad_input = Tensor(input.shape());

  const std::size_t band = band_rows(g);
  std::vector<double> col(g.patch() * band * g.out_w);
  RowMat grad_col;
  for (std::size_t y0 = 0; y0 < g.out_h; y0 += band) {
    const std::size_t rows = std::min(band, g.out_h - y0);
    const auto n = static_cast<Eigen::Index>(rows * g.out_w);
    ConstStridedMap grad_band(grad_output.data() + y0 * g.out_w, out_c, n,
                              Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
    im2col(input.data(), g, y0, rows, col.data());
    Eigen::Map<const RowMat> cols(col.data(), patch, n);
    grad_kernels.noalias() += grad_band * cols.transpose();
    if (input_grad == InputGrad::compute) {
      grad_col.noalias() = kernels.transpose() * grad_band;
      col2im_add(grad_col.data(), g, y0, rows, grad_input.data());
    }
  }
  return grad_input;
}

PoolResult maxpool2x2_forward(const Tensor& input) {
  require_rank(input, 3, "maxpool2x2_forward");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2x2_forward: odd spatial extent in " + shape_string(input.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult result{Tensor({c, oh, ow}), PoolIndices{input.shape(), {}}};
  result.indices.argmax.resize(c * oh * ow);
  const double* in = input.data();
  double* out = result.output.data();
  std::uint32_t* idx = result.indices.argmax.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t base = (ch * h + 2 * y) * w + 2 * x;
        const std::size_t candidates[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = candidates[0];
        for (std::size_t k = 1; k < 4; ++k) {
          if (in[candidates[k]] > in[best]) best = candidates[k];
        }
        const std::size_t o = (ch * oh + y) * ow + x;
        out[o] = in[best];
        idx[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return result;
}

Tensor maxpool2x2_backward(const PoolIndices& indices, const Tensor& grad_output) {
  if (grad_output.size() != indices.argmax.size()) {
    throw ShapeError("maxpool2x2_backward: grad_output " + shape_string(grad_output.shape()) +
                     " does not match " + std::to_string(indices.argmax.size()) + " indices");
  }
  Tensor grad_input(indices.input_shape);
  const std::size_t limit = grad_input.size();
  for (std::size_t o = 0; o < indices.argmax.size(); ++o) {
    const std::size_t i = indices.argmax[o];
    if (i >= limit) {
      throw ShapeError("maxpool2x2_backward: argmax index " + std::to_string(i) +
                       " out of bounds for " + shape_string(indices.input_shape));
    }
    grad_input[i] += grad_output[o];
  }
  return grad_input;
}

Tensor tanh_forward(const Tensor& input) {
  Tensor out = input;
  tanh_forward_inplace(out);
  return out;
}

void tanh_forward_inplace(Tensor& t) {
  for (double& v : t.values()) v = std::tanh(v);
  t.require_finite("tanh_forward");
}

Tensor tanh_backward(const Tensor& output, const Tensor& grad_output) {
  require_shape(grad_output, output.shape(), "tanh_backward");
  Tensor grad(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    grad[i] = (1.0 - output[i] * output[i]) * grad_output[i];
  }
  return grad;
}

Tensor linear_forward(const Tensor& input, const LinearLayerParams& params) {
  const std::size_t in = params.in_features(), out = params.out_features();
  require_shape(input, {in}, "linear_forward");
  Tensor output = params.bias;
  Eigen::Map<const RowMat> w(params.weight.data(), static_cast<Eigen::Index>(out),
                             static_cast<Eigen::Index>(in));
  Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(in));
  Eigen::Map<Eigen::VectorXd> y(output.data(), static_cast<Eigen::Index>(out));
  y.noalias() += w * x;
  output.require_finite("linear_forward");
  return output;
}

Tensor linear_backward(const Tensor& input, LinearLayerParams& params, const Tensor& grad_output) {
  const auto in = static_cast<Eigen::Index>(params.in_features());
  const auto out = static_cast<Eigen::Index>(params.out_features());
  require_shape(input, {params.in_features()}, "linear_backward input");
  require_shape(grad_output, {params.out_features()}, "linear_backward grad_output");
  Eigen::Map<const RowMat> w(params.weight.data(), out, in);
  Eigen::Map<RowMat> gw(params.grad_weight.data(), out, in);
  Eigen::Map<const Eigen::VectorXd> x(input.data(), in);
  Eigen::Map<const Eigen::VectorXd> g(grad_output.data(), out);
  Eigen::Map<Eigen::VectorXd> gb(params.grad_bias.data(), out);
  gw.noalias() += g * x.transpose();
  gb += g;
  Tensor grad_input({params.in_features()});
  Eigen::Map<Eigen::VectorXd> gx(grad_input.data(), in);
  gx.noalias() = w.transpose() * g;
  return grad_input;
}

Tensor linear_forward_batch(const Tensor& input, const LinearLayerParams& params) {
  require_rank(input, 2, "linear_forward_batch");
  const auto in = static_cast<Eigen::Index>(params.in_features());
  const auto out = static_cast<Eigen::Index>(params.out_features());
  if (input.dim(0) != params.in_features()) {
    throw ShapeError("linear_forward_batch: input " + shape_string(input.shape()) +
                     " does not match " + std::to_string(params.in_features()) + " features");
  }
  const auto n = static_cast<Eigen::Index>(input.dim(1));
  Tensor output({params.out_features(), input.dim(1)});
  Eigen::Map<const RowMat> w(params.weight.data(), out, in);
  Eigen::Map<const RowMat> x(input.data(), in, n);
  Eigen::Map<RowMat> y(output.data(), out, n);
  Eigen::Map<const Eigen::VectorXd> b(params.bias.data(), out);
  y.noalias() = w * x;
  y.colwise() += b;
  output.require_finite("linear_forward_batch");
  return output;
}

void softmax(std::span<const double> logits, std::span<double> out) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - peak);
    total += out[k];
  }
  for (double& v : out) v /= total;
}

LossAndGrad softmax_nll(const Tensor& logits, std::size_t target) {
  require_rank(logits, 1, "softmax_nll");
  const std::size_t k = logits.size();
  if (target >= k) {
    throw ShapeError("softmax_nll: target " + std::to_string(target) + " out of range for " +
                     std::to_string(k) + " classes");
  }
  logits.require_finite("softmax_nll logits");
  const auto v = logits.values();
  const double peak = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += std::exp(x - peak);
  const double log_total = std::log(total);
  LossAndGrad result{log_total - (v[target] - peak), Tensor({k})};
  for (std::size_t i = 0; i < k; ++i) result.grad_logits[i] = std::exp(v[i] - peak - log_total);
  result.grad_logits[target] -= 1.0;
  return result;
}

Tensor upsample_nearest(const Tensor& input, std::size_t factor) {
  require_rank(input, 3, "upsample_nearest");
  if (factor == 0) throw ShapeError("upsample_nearest: factor must be positive");
  if (factor == 1) return input;
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = h * factor, ow = w * factor;
  Tensor out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = input.channel(ch).data();
    double* dst = out.channel(ch).data();
    for (std::size_t y = 0; y < oh; ++y) {
      const double* srow = src + (y / factor) * w;
      double* drow = dst + y * ow;
      for (std::size_t x = 0; x < ow; ++x) drow[x] = srow[x / factor];
    }
  }
  return out;
}

Tensor upsample_nearest_backward(const Tensor& grad_output, std::size_t factor) {
  require_rank(grad_output, 3, "upsample_nearest_backward");
  if (factor == 0) throw ShapeError("upsample_nearest_backward: factor must be positive");
  if (factor == 1) return grad_output;
  const std::size_t c = grad_output.dim(0), oh = grad_output.dim(1), ow = grad_output.dim(2);
  if (oh % factor != 0 || ow % factor != 0) {
    throw ShapeError("upsample_nearest_backward: " + shape_string(grad_output.shape()) +
                     " not divisible by factor " + std::to_string(factor));
  }
  const std::size_t h = oh / factor, w = ow / factor;
  Tensor grad({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = grad_output.channel(ch).data();
    double* dst = grad.channel(ch).data();
    for (std::size_t y = 0; y < oh; ++y) {
      const double* srow = src + y * ow;
      double* drow = dst + (y / factor) * w;
      for (std::size_t x = 0; x < ow; ++x) drow[x / factor] += srow[x];
    }
  }
  return grad;
}

Tensor concat_channels(std::span<const Tensor> inputs) {
  if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
  std::size_t channels = 0;
  for (const Tensor& t : inputs) {
    require_rank(t, 3, "concat_channels");
    if (t.dim(1) != inputs[0].dim(1) || t.dim(2) != inputs[0].dim(2)) {
      throw ShapeError("concat_channels: spatial mismatch " + shape_string(t.shape()) + " vs " +
                       shape_string(inputs[0].shape()));
    }
    channels += t.dim(0);
  }
  Tensor out({channels, inputs[0].dim(1), inputs[0].dim(2)});
  double* dst = out.data();
  for (const Tensor& t : inputs) dst = std::copy(t.values().begin(), t.values().end(), dst);
  return out;
}

}  // namespace rgbdseg
