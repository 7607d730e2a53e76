#include "rgbdseg/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace rgbdseg {

namespace {

// Normalized separable filtering of one plane. Taps falling outside the
// image are dropped and the remaining weights renormalized.
std::vector<double> separable_mean(const double* src, std::size_t h, std::size_t w,
                                   const std::vector<double>& taps) {
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const auto ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);

  auto norms = [&](std::ptrdiff_t n) {
    std::vector<double> s(static_cast<std::size_t>(n), 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        if (i + k >= 0 && i + k < n) s[static_cast<std::size_t>(i)] += taps[static_cast<std::size_t>(k + radius)];
      }
    }
    return s;
  };
  const std::vector<double> sx = norms(iw), sy = norms(ih);

  std::vector<double> horiz(h * w, 0.0);
  for (std::ptrdiff_t y = 0; y < ih; ++y) {
    const double* row = src + y * iw;
    double* out = horiz.data() + y * iw;
    for (std::ptrdiff_t x = 0; x < iw; ++x) {
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(-radius, -x);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(radius, iw - 1 - x);
      double acc = 0.0;
      for (std::ptrdiff_t k = lo; k <= hi; ++k) acc += taps[static_cast<std::size_t>(k + radius)] * row[x + k];
      out[x] = acc / sx[static_cast<std::size_t>(x)];
    }
  }
  std::vector<double> result(h * w, 0.0);
  for (std::ptrdiff_t y = 0; y < ih; ++y) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(-radius, -y);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(radius, ih - 1 - y);
    double* out = result.data() + y * iw;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double t = taps[static_cast<std::size_t>(k + radius)];
      const double* in = horiz.data() + (y + k) * iw;
      for (std::ptrdiff_t x = 0; x < iw; ++x) out[x] += t * in[x];
    }
    const double norm = sy[static_cast<std::size_t>(y)];
    for (std::ptrdiff_t x = 0; x < iw; ++x) out[x] /= norm;
  }
  return result;
}

void require_plane(const Tensor& plane, const char* what) {
  require_rank(plane, 3, what);
  if (plane.dim(0) != 1) {
    throw ShapeError(std::string(what) + ": expected a single plane, got " +
                     shape_string(plane.shape()));
  }
}

void require_odd_window(std::size_t window, const char* what) {
  if (window == 0 || window % 2 == 0) {
    throw ConfigError(std::string(what) + ": window must be odd, got " + std::to_string(window));
  }
}

}  // namespace

Tensor bilinear_resize(const Tensor& image, std::size_t height, std::size_t width) {
  require_rank(image, 3, "bilinear_resize");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == 0 || w == 0 || height == 0 || width == 0) {
    throw ShapeError("bilinear_resize: empty extent");
  }
  if (h == height && w == width) return image;

  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  auto taps = [](std::size_t src, std::size_t dst) {
    std::vector<Tap> t(dst);
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    for (std::size_t i = 0; i < dst; ++i) {
      double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(src - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      const std::size_t i1 = std::min(i0 + 1, src - 1);
      t[i] = {i0, i1, s - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(h, height), tx = taps(w, width);
  Tensor out({c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = image.channel(ch).data();
    double* dst = out.channel(ch).data();
    for (std::size_t y = 0; y < height; ++y) {
      const double* r0 = src + ty[y].i0 * w;
      const double* r1 = src + ty[y].i1 * w;
      const double fy = ty[y].f;
      for (std::size_t x = 0; x < width; ++x) {
        const Tap& t = tx[x];
        const double top = r0[t.i0] + t.f * (r0[t.i1] - r0[t.i0]);
        const double bottom = r1[t.i0] + t.f * (r1[t.i1] - r1[t.i0]);
        dst[y * width + x] = top + fy * (bottom - top);
      }
    }
  }
  return out;
}

RgbdFrame rescale_frame(const Tensor& raw_rgb, const Tensor& raw_depth,
                        const PreprocessConfig& config) {
  require_rank(raw_rgb, 3, "rescale_frame rgb");
  require_rank(raw_depth, 3, "rescale_frame depth");
  if (raw_rgb.dim(0) != 3 || raw_depth.dim(0) != 1) {
    throw ShapeError("rescale_frame: expected 3-channel rgb and 1-channel depth, got " +
                     shape_string(raw_rgb.shape()) + " and " + shape_string(raw_depth.shape()));
  }
  if (raw_rgb.dim(1) != raw_depth.dim(1) || raw_rgb.dim(2) != raw_depth.dim(2)) {
    throw ShapeError("rescale_frame: rgb " + shape_string(raw_rgb.shape()) +
                     " and depth " + shape_string(raw_depth.shape()) + " differ in size");
  }
  if (!raw_rgb.all_finite()) throw DataError("rescale_frame: non-finite color value");
  for (double d : raw_depth.values()) {
    if (!std::isfinite(d) || d < 0.0) {
      throw DataError("rescale_frame: depth must be finite and non-negative");
    }
  }
  return {bilinear_resize(raw_rgb, config.height, config.width),
          bilinear_resize(raw_depth, config.height, config.width)};
}

std::vector<double> lcn_taps(std::size_t window) {
  require_odd_window(window, "lcn_taps");
  const double sigma = static_cast<double>(window) / 4.0;
  const auto radius = static_cast<std::ptrdiff_t>(window / 2);
  std::vector<double> taps(window);
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    taps[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

LocalStatistics local_statistics(const Tensor& plane, std::size_t window) {
  require_plane(plane, "local_statistics");
  plane.require_finite("local_statistics");
  const std::size_t h = plane.dim(1), w = plane.dim(2);
  const auto taps = lcn_taps(window);

  // Statistics are shift-invariant; centering on one sample keeps a
  // constant plane exactly zero and avoids cancellation on large offsets.
  const double shift = plane[0];
  std::vector<double> centered(h * w), squared(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    centered[i] = plane[i] - shift;
    squared[i] = centered[i] * centered[i];
  }
  const auto mean = separable_mean(centered.data(), h, w, taps);
  const auto mean_sq = separable_mean(squared.data(), h, w, taps);

  LocalStatistics stats{Tensor({1, h, w}), Tensor({1, h, w})};
  for (std::size_t i = 0; i < h * w; ++i) {
    stats.mean[i] = mean[i] + shift;
    stats.stddev[i] = std::sqrt(std::max(mean_sq[i] - mean[i] * mean[i], 0.0));
  }
  return stats;
}

Tensor local_contrast_normalize(const Tensor& plane, std::size_t window, double epsilon) {
  require_plane(plane, "local_contrast_normalize");
  require_odd_window(window, "local_contrast_normalize");
  if (!plane.all_finite()) throw NumericError("local_contrast_normalize: non-finite input");
  const LocalStatistics stats = local_statistics(plane, window);
  Tensor out(plane.shape());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    out[i] = (plane[i] - stats.mean[i]) / std::max(stats.stddev[i], epsilon);
  }
  out.require_finite("local_contrast_normalize");
  return out;
}

Tensor normalize_channels(const Tensor& image, std::size_t window, double epsilon) {
  require_rank(image, 3, "normalize_channels");
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < image.dim(0); ++ch) {
    const Tensor plane = local_contrast_normalize(image.slice_channels(ch, 1), window, epsilon);
    std::copy(plane.values().begin(), plane.values().end(), out.channel(ch).begin());
  }
  return out;
}

Tensor blur_decimate(const Tensor& image) {
  require_rank(image, 3, "blur_decimate");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("blur_decimate: extents must be even, got " + shape_string(image.shape()));
  }
  static const std::vector<double> binomial = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  Tensor out({c, h / 2, w / 2});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto blurred = separable_mean(image.channel(ch).data(), h, w, binomial);
    double* dst = out.channel(ch).data();
    for (std::size_t y = 0; y < h / 2; ++y) {
      for (std::size_t x = 0; x < w / 2; ++x) dst[y * (w / 2) + x] = blurred[(2 * y) * w + 2 * x];
    }
  }
  return out;
}

Tensor stack_rgbd(const RgbdFrame& frame) {
  const Tensor parts[2] = {frame.rgb, frame.depth};
  std::size_t channels = 0;
  for (const Tensor& p : parts) channels += p.dim(0);
  Tensor out({channels, frame.rgb.dim(1), frame.rgb.dim(2)});
  double* dst = out.data();
  for (const Tensor& p : parts) dst = std::copy(p.values().begin(), p.values().end(), dst);
  return out;
}

std::vector<Tensor> gaussian_levels(const RgbdFrame& frame) {
  std::vector<Tensor> levels;
  levels.reserve(kPyramidScales);
  levels.push_back(stack_rgbd(frame));
  for (std::size_t s = 1; s < kPyramidScales; ++s) levels.push_back(blur_decimate(levels.back()));
  return levels;
}

Pyramid build_pyramid(const RgbdFrame& frame, const PreprocessConfig& config) {
  require_shape(frame.rgb, {3, config.height, config.width}, "build_pyramid rgb");
  require_shape(frame.depth, {1, config.height, config.width}, "build_pyramid depth");
  if (config.height % 4 != 0 || config.width % 4 != 0) {
    throw ShapeError("build_pyramid: frame extents must be divisible by 4");
  }
  Pyramid pyramid;
  for (Tensor& level : gaussian_levels(frame)) {
    pyramid.scales.push_back(normalize_channels(level, config.lcn_window, config.lcn_epsilon));
  }
  return pyramid;
}

}  // namespace rgbdseg
