#pragma once

#include <optional>
#include <vector>

#include "rgbdseg/superpixel.hpp"

namespace rgbdseg {

struct TemporalConfig {
  double alpha = 0.7;        // weight of the history, in [0, 1)
  double min_overlap = 0.3;  // matched overlap / current region size, in [0, 1]

  void validate() const;
};

/// For every current region, the previous region it continues, if any.
using RegionMatch = std::vector<std::optional<std::size_t>>;

/// Each current region maps to the previous region sharing the most pixels
/// (lowest id on ties) when that overlap covers at least `min_overlap` of
/// the current region.
RegionMatch match_regions(const Segmentation& current, const Segmentation& previous,
                          double min_overlap);

struct TrackState {
  Segmentation segmentation;
  Tensor distributions;  // R x K, rows normalized
};

struct SmoothResult {
  Tensor distributions;
  TrackState state;
};

/// Matched regions blend their history: normalize(alpha * previous +
/// (1 - alpha) * current). Unmatched regions, and every region on the first
/// frame (no state), keep their current distribution.
SmoothResult smooth(const Tensor& region_dists, const Segmentation& seg, const RegionMatch& match,
                    const TrackState* state, const TemporalConfig& config);

/// Frame-to-frame driver around match_regions and smooth.
class TemporalSmoother {
 public:
  explicit TemporalSmoother(TemporalConfig config = {});

  /// Returns smoothed R x K distributions for this frame's regions.
  Tensor step(const Tensor& region_dists, const Segmentation& seg);
  void reset() { state_.reset(); }
  const TemporalConfig& config() const { return config_; }

 private:
  TemporalConfig config_;
  std::optional<TrackState> state_;
};

/// Fraction of pixels whose label differs between two label maps.
double flicker_fraction(const LabelMap& a, const LabelMap& b);

}  // namespace rgbdseg
