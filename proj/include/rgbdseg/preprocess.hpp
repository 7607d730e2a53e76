#pragma once

#include <cstddef>
#include <vector>

#include "rgbdseg/tensor.hpp"

namespace rgbdseg {

inline constexpr std::size_t kPyramidScales = 3;
inline constexpr std::size_t kRgbdChannels = 4;

struct PreprocessConfig {
  std::size_t height = 240;
  std::size_t width = 320;
  std::size_t lcn_window = 15;  // odd; Gaussian sigma is window / 4
  double lcn_epsilon = 1e-4;
};

/// Color in [0,1] (3 x H x W) and depth in meters (1 x H x W).
struct RgbdFrame {
  Tensor rgb;
  Tensor depth;

  std::size_t height() const { return rgb.dim(1); }
  std::size_t width() const { return rgb.dim(2); }
};

/// Normalized RGBD planes, finest scale first. Each scale is 4 x h x w and
/// halves the extents of the previous one.
struct Pyramid {
  std::vector<Tensor> scales;
};

/// Bilinear resampling with pixel-center alignment; borders clamp.
Tensor bilinear_resize(const Tensor& image, std::size_t height, std::size_t width);

/// Validates and rescales a raw frame to the configured size.
RgbdFrame rescale_frame(const Tensor& raw_rgb, const Tensor& raw_depth,
                        const PreprocessConfig& config = {});

/// Normalized 1-D Gaussian taps for an odd window, sigma = window / 4.
std::vector<double> lcn_taps(std::size_t window);

struct LocalStatistics {
  Tensor mean;    // 1 x H x W, Gaussian-weighted
  Tensor stddev;  // weighted std of the window about its own mean
};

/// Weighted statistics of every window; windows truncated by the border are
/// renormalized over their in-bounds taps.
LocalStatistics local_statistics(const Tensor& plane, std::size_t window);

/// (x - local mean) / max(local std, epsilon) on a 1 x H x W plane.
Tensor local_contrast_normalize(const Tensor& plane, std::size_t window = 15,
                                double epsilon = 1e-4);

/// Applies local_contrast_normalize to every channel independently.
Tensor normalize_channels(const Tensor& image, std::size_t window = 15, double epsilon = 1e-4);

/// 5-tap binomial blur followed by keeping even rows and columns.
Tensor blur_decimate(const Tensor& image);

/// Stacks RGB and depth into a 4-channel image.
Tensor stack_rgbd(const RgbdFrame& frame);

/// Unnormalized Gaussian levels G0..G2 of the stacked RGBD frame.
std::vector<Tensor> gaussian_levels(const RgbdFrame& frame);

Pyramid build_pyramid(const RgbdFrame& frame, const PreprocessConfig& config = {});

}  // namespace rgbdseg
