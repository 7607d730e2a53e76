#include "rgbdseg/convnet.hpp"

#include <random>

namespace rgbdseg {

NetworkConfig NetworkConfig::shrunken() {
  NetworkConfig c;
  c.channels = {4, 2, 3, 4};
  c.kernel = 3;
  c.height = 16;
  c.width = 16;
  return c;
}

void NetworkConfig::validate() const {
  for (std::size_t c : channels) {
    if (c == 0) throw ConfigError("network: channel counts must be positive");
  }
  if (channels[0] != 3 && channels[0] != kRgbdChannels) {
    throw ConfigError("network: input channels must be 3 (RGB) or 4 (RGBD)");
  }
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("network: kernel must be odd");
  // The coarsest scale is downsampled twice more by the pyramid.
  const std::size_t divisor = kStride << (kPyramidScales - 1);
  if (height == 0 || width == 0 || height % divisor != 0 || width % divisor != 0) {
    throw ConfigError("network: frame " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be divisible by " + std::to_string(divisor));
  }
}

FeatureExtractorParams FeatureExtractorParams::zeros(const NetworkConfig& config) {
  config.validate();
  FeatureExtractorParams p;
  for (std::size_t s = 0; s < NetworkConfig::kStages; ++s) {
    p.stages[s] = ConvLayerParams::zeros(config.channels[s + 1], config.channels[s], config.kernel);
  }
  return p;
}

FeatureExtractorParams FeatureExtractorParams::initialize(const NetworkConfig& config,
                                                          std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  FeatureExtractorParams p;
  for (std::size_t s = 0; s < NetworkConfig::kStages; ++s) {
    p.stages[s] =
        ConvLayerParams::uniform(config.channels[s + 1], config.channels[s], config.kernel, rng);
  }
  return p;
}

void FeatureExtractorParams::zero_grad() {
  for (auto& s : stages) s.zero_grad();
}

namespace {

Tensor select_input(const Tensor& scale_input, const FeatureExtractorParams& params) {
  require_rank(scale_input, 3, "extract_scale");
  const std::size_t want = params.input_channels();
  if (scale_input.dim(0) == want) return scale_input;
  if (scale_input.dim(0) > want) return scale_input.slice_channels(0, want);
  throw ShapeError("extract_scale: input " + shape_string(scale_input.shape()) + " has fewer than " +
                   std::to_string(want) + " channels");
}

void require_divisible(const Tensor& input) {
  if (input.dim(1) % NetworkConfig::kStride != 0 || input.dim(2) % NetworkConfig::kStride != 0) {
    throw ShapeError("extract_scale: extents of " + shape_string(input.shape()) +
                     " must be divisible by 4");
  }
}

}  // namespace

ScaleTrace trace_scale(const Tensor& scale_input, const FeatureExtractorParams& params) {
  ScaleTrace t;
  t.input = select_input(scale_input, params);
  require_divisible(t.input);
  t.act1 = conv2d_forward(t.input, params.stages[0], Padding::same);
  tanh_forward_inplace(t.act1);
  auto p1 = maxpool2x2_forward(t.act1);
  t.pooled1 = std::move(p1.output);
  t.pool1 = std::move(p1.indices);
  t.act2 = conv2d_forward(t.pooled1, params.stages[1], Padding::same);
  tanh_forward_inplace(t.act2);
  auto p2 = maxpool2x2_forward(t.act2);
  t.pooled2 = std::move(p2.output);
  t.pool2 = std::move(p2.indices);
  t.act3 = conv2d_forward(t.pooled2, params.stages[2], Padding::same);
  tanh_forward_inplace(t.act3);
  return t;
}

Tensor extract_scale(const Tensor& scale_input, const FeatureExtractorParams& params) {
  const Tensor input = select_input(scale_input, params);
  require_divisible(input);
  Tensor x = conv2d_forward(input, params.stages[0], Padding::same);
  tanh_forward_inplace(x);
  x = maxpool2x2_forward(x).output;
  x = conv2d_forward(x, params.stages[1], Padding::same);
  tanh_forward_inplace(x);
  x = maxpool2x2_forward(x).output;
  x = conv2d_forward(x, params.stages[2], Padding::same);
  tanh_forward_inplace(x);
  return x;
}

Tensor backward_scale(const ScaleTrace& trace, FeatureExtractorParams& params,
                      const Tensor& grad_output, InputGrad input_grad) {
  require_shape(grad_output, trace.act3.shape(), "backward_scale");
  Tensor g = tanh_backward(trace.act3, grad_output);
  g = conv2d_backward(trace.pooled2, params.stages[2], g, Padding::same);
  g = maxpool2x2_backward(trace.pool2, g);
  g = tanh_backward(trace.act2, g);
  g = conv2d_backward(trace.pooled1, params.stages[1], g, Padding::same);
  g = maxpool2x2_backward(trace.pool1, g);
  g = tanh_backward(trace.act1, g);
  return conv2d_backward(trace.input, params.stages[0], g, Padding::same, input_grad);
}

namespace {

void require_pyramid(const Pyramid& pyramid) {
  if (pyramid.scales.size() != kPyramidScales) {
    throw ShapeError("extract_multiscale: expected " + std::to_string(kPyramidScales) +
                     " scales, got " + std::to_string(pyramid.scales.size()));
  }
  for (std::size_t s = 1; s < kPyramidScales; ++s) {
    const Tensor& fine = pyramid.scales[s - 1];
    const Tensor& coarse = pyramid.scales[s];
    require_rank(coarse, 3, "extract_multiscale");
    if (coarse.dim(1) * 2 != fine.dim(1) || coarse.dim(2) * 2 != fine.dim(2)) {
      throw ShapeError("extract_multiscale: scale " + std::to_string(s) + " " +
                       shape_string(coarse.shape()) + " is not half of " +
                       shape_string(fine.shape()));
    }
  }
}

Tensor assemble(std::vector<Tensor> per_scale) {
  for (std::size_t s = 0; s < per_scale.size(); ++s) {
    per_scale[s] = upsample_nearest(per_scale[s], std::size_t{1} << s);
  }
  return concat_channels(per_scale);
}

}  // namespace

Tensor extract_multiscale(const Pyramid& pyramid, const FeatureExtractorParams& params) {
  require_pyramid(pyramid);
  std::vector<Tensor> per_scale;
  per_scale.reserve(kPyramidScales);
  for (const Tensor& scale : pyramid.scales) per_scale.push_back(extract_scale(scale, params));
  return assemble(std::move(per_scale));
}

MultiscaleTrace trace_multiscale(const Pyramid& pyramid, const FeatureExtractorParams& params) {
  require_pyramid(pyramid);
  MultiscaleTrace trace;
  std::vector<Tensor> per_scale;
  for (const Tensor& scale : pyramid.scales) {
    trace.scales.push_back(trace_scale(scale, params));
    per_scale.push_back(trace.scales.back().act3);
  }
  trace.features = assemble(std::move(per_scale));
  return trace;
}

std::vector<Tensor> backward_multiscale(const MultiscaleTrace& trace,
                                        FeatureExtractorParams& params,
                                        const Tensor& grad_features, InputGrad input_grad) {
  require_shape(grad_features, trace.features.shape(), "backward_multiscale");
  const std::size_t block = params.output_channels();
  std::vector<Tensor> input_grads;
  for (std::size_t s = 0; s < trace.scales.size(); ++s) {
    const Tensor grad_block = grad_features.slice_channels(s * block, block);
    const Tensor grad_scale = upsample_nearest_backward(grad_block, std::size_t{1} << s);
    input_grads.push_back(backward_scale(trace.scales[s], params, grad_scale, input_grad));
  }
  return input_grads;
}

void extract_backward(const Pyramid& pyramid, FeatureExtractorParams& params,
                      const Tensor& grad_features) {
  const MultiscaleTrace trace = trace_multiscale(pyramid, params);
  backward_multiscale(trace, params, grad_features);
}

}  // namespace rgbdseg
