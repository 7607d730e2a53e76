#pragma once

#include <cstdint>
#include <vector>

#include "rgbdseg/tensor.hpp"

namespace rgbdseg {

/// Ground truth pixels carrying this label are skipped by training and
/// evaluation.
inline constexpr std::int32_t kIgnoreLabel = -1;

struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::int32_t fill = 0)
      : height(h), width(w), labels(h * w, fill) {}

  std::size_t size() const { return labels.size(); }
  std::int32_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::int32_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }

  bool operator==(const LabelMap&) const = default;
};

/// Per-pixel argmax of a K x H x W distribution; ties go to the lowest class.
LabelMap argmax_labels(const Tensor& distributions);

/// Majority label of each factor x factor block, ignoring kIgnoreLabel
/// pixels (lowest label on ties; kIgnoreLabel if the block is all ignored).
LabelMap downsample_majority(const LabelMap& labels, std::size_t factor);

/// Nearest-neighbour upsampling by an integer factor.
LabelMap upsample_labels(const LabelMap& labels, std::size_t factor);

/// Nearest-neighbour resampling with pixel-center alignment.
LabelMap resize_labels(const LabelMap& labels, std::size_t height, std::size_t width);

}  // namespace rgbdseg
