#pragma once

#include <cstddef>
#include <vector>

#include "rgbdseg/label_map.hpp"
#include "rgbdseg/tensor.hpp"

namespace rgbdseg {

struct SuperpixelConfig {
  double k = 300.0;           // threshold constant, colour on the 0-255 scale
  std::size_t min_size = 20;  // minimum region area after merging
  double sigma = 0.8;         // Gaussian pre-smoothing; 0 disables it

  void validate() const;
};

/// Partition of the image into 4-connected regions with contiguous ids
/// 0..R-1, numbered in raster order of first appearance.
struct Segmentation {
  LabelMap regions;
  std::vector<std::size_t> sizes;

  std::size_t count() const { return sizes.size(); }
};

/// Separable Gaussian smoothing with edge clamping, radius ceil(4 sigma).
Tensor smooth_color(const Tensor& image, double sigma);

/// Graph-based segmentation of a 3 x H x W colour image in [0,1].
///
/// Pixels are joined over an 8-connected grid graph whose edge weights are
/// Euclidean colour distances (0-255 scale) after smoothing. Edges are
/// visited by ascending weight, ties by construction order, and merge two
/// components when the weight is at most min(Int(A) + k/|A|, Int(B) + k/|B|).
/// Components below min_size are then merged along the sorted edges.
/// Finally regions joined only through diagonal edges are split into their
/// 4-connected parts and any part below min_size is merged into a
/// 4-neighbour, again in ascending edge order.
Segmentation segment(const Tensor& rgb, const SuperpixelConfig& config = {});

/// Mean distribution of every region: R x K.
Tensor region_distributions(const Tensor& distributions, const Segmentation& seg);

/// Same as region_distributions on upsample_nearest(distributions, factor)
/// without materializing the upsampled tensor; `distributions` is at
/// 1/factor of the segmentation's resolution.
Tensor region_distributions_upsampled(const Tensor& distributions, const Segmentation& seg,
                                      std::size_t factor);

/// Assigns each pixel the argmax of its region's row in `region_dists`
/// (lowest class on ties).
LabelMap assign_region_labels(const Tensor& region_dists, const Segmentation& seg);

/// Averages the K x H x W distributions over each region and labels the
/// whole region with the argmax of that mean.
LabelMap aggregate(const Tensor& distributions, const Segmentation& seg);

}  // namespace rgbdseg
