#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rgbdseg/layers.hpp"
#include "rgbdseg/preprocess.hpp"

namespace rgbdseg {

/// Architecture of the shared feature extractor: three conv(same) + tanh
/// stages, with 2x2 max pooling after the first two, applied to every
/// pyramid scale.
struct NetworkConfig {
  // Input channels followed by the output width of each stage.
  std::array<std::size_t, 4> channels{4, 16, 64, 256};
  std::size_t kernel = 7;
  std::size_t height = 240;
  std::size_t width = 320;

  static constexpr std::size_t kStages = 3;
  static constexpr std::size_t kStride = 4;

  /// 4 -> 2 -> 3 -> 4 channels, 3x3 kernels, 16x16 frames. Used by gradient checks.
  static NetworkConfig shrunken();

  std::size_t input_channels() const { return channels[0]; }
  std::size_t scale_channels() const { return channels[kStages]; }
  std::size_t feature_channels() const { return channels[kStages] * kPyramidScales; }
  std::size_t feature_height() const { return height / kStride; }
  std::size_t feature_width() const { return width / kStride; }

  void validate() const;
};

struct FeatureExtractorParams {
  std::array<ConvLayerParams, NetworkConfig::kStages> stages;

  static FeatureExtractorParams zeros(const NetworkConfig& config);
  static FeatureExtractorParams initialize(const NetworkConfig& config, std::uint64_t seed);

  std::size_t input_channels() const { return stages[0].in_channels(); }
  std::size_t output_channels() const { return stages.back().out_channels(); }
  void zero_grad();
};

/// Intermediate activations of one scale, kept for the backward pass.
struct ScaleTrace {
  Tensor input;
  Tensor act1;
  PoolIndices pool1;
  Tensor pooled1;
  Tensor act2;
  PoolIndices pool2;
  Tensor pooled2;
  Tensor act3;
};

Tensor extract_scale(const Tensor& scale_input, const FeatureExtractorParams& params);
ScaleTrace trace_scale(const Tensor& scale_input, const FeatureExtractorParams& params);

/// Accumulates parameter gradients and returns the input gradient (empty
/// when `input_grad` is skip).
Tensor backward_scale(const ScaleTrace& trace, FeatureExtractorParams& params,
                      const Tensor& grad_output, InputGrad input_grad = InputGrad::skip);

struct MultiscaleTrace {
  std::vector<ScaleTrace> scales;
  Tensor features;
};

/// Per-scale features upsampled to the finest feature resolution and
/// concatenated fine to coarse.
Tensor extract_multiscale(const Pyramid& pyramid, const FeatureExtractorParams& params);
MultiscaleTrace trace_multiscale(const Pyramid& pyramid, const FeatureExtractorParams& params);

/// Accumulates the summed per-scale parameter gradients. Returns per-scale
/// gradients with respect to the pyramid when requested.
std::vector<Tensor> backward_multiscale(const MultiscaleTrace& trace,
                                        FeatureExtractorParams& params,
                                        const Tensor& grad_features,
                                        InputGrad input_grad = InputGrad::skip);

/// Recomputes the forward pass, then accumulates parameter gradients.
void extract_backward(const Pyramid& pyramid, FeatureExtractorParams& params,
                      const Tensor& grad_features);

}  // namespace rgbdseg
