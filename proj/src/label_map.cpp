#include "rgbdseg/label_map.hpp"

#include <algorithm>
#include <map>

namespace rgbdseg {

LabelMap argmax_labels(const Tensor& distributions) {
  require_rank(distributions, 3, "argmax_labels");
  const std::size_t k = distributions.dim(0), h = distributions.dim(1), w = distributions.dim(2);
  if (k == 0) throw ShapeError("argmax_labels: no classes");
  LabelMap out(h, w, 0);
  const std::size_t plane = h * w;
  std::vector<double> best(distributions.channel(0).begin(), distributions.channel(0).end());
  for (std::size_t c = 1; c < k; ++c) {
    const double* p = distributions.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (p[i] > best[i]) {
        best[i] = p[i];
        out.labels[i] = static_cast<std::int32_t>(c);
      }
    }
  }
  return out;
}

LabelMap downsample_majority(const LabelMap& labels, std::size_t factor) {
  if (factor == 0 || labels.height % factor != 0 || labels.width % factor != 0) {
    throw ShapeError("downsample_majority: " + std::to_string(labels.height) + "x" +
                     std::to_string(labels.width) + " not divisible by " + std::to_string(factor));
  }
  LabelMap out(labels.height / factor, labels.width / factor, kIgnoreLabel);
  std::map<std::int32_t, std::size_t> votes;
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      votes.clear();
      for (std::size_t dy = 0; dy < factor; ++dy) {
        for (std::size_t dx = 0; dx < factor; ++dx) {
          const std::int32_t l = labels.at(y * factor + dy, x * factor + dx);
          if (l != kIgnoreLabel) ++votes[l];
        }
      }
      std::size_t best = 0;
      for (const auto& [label, count] : votes) {
        if (count > best) {
          best = count;
          out.at(y, x) = label;
        }
      }
    }
  }
  return out;
}

LabelMap upsample_labels(const LabelMap& labels, std::size_t factor) {
  if (factor == 0) throw ShapeError("upsample_labels: factor must be positive");
  LabelMap out(labels.height * factor, labels.width * factor);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) out.at(y, x) = labels.at(y / factor, x / factor);
  }
  return out;
}

LabelMap resize_labels(const LabelMap& labels, std::size_t height, std::size_t width) {
  if (labels.size() == 0 || height == 0 || width == 0) {
    throw ShapeError("resize_labels: empty label map or target size");
  }
  // Source index floor((i + 0.5) * src / dst), exact in integer arithmetic.
  auto source = [](std::size_t i, std::size_t src, std::size_t dst) {
    return std::min(src - 1, ((2 * i + 1) * src) / (2 * dst));
  };
  LabelMap out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = source(y, labels.height, height);
    for (std::size_t x = 0; x < width; ++x) {
      out.at(y, x) = labels.at(sy, source(x, labels.width, width));
    }
  }
  return out;
}

}  // namespace rgbdseg
