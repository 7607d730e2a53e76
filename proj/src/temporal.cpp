#include "rgbdseg/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace rgbdseg {

void TemporalConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("temporal: alpha must lie in [0, 1)");
  if (!(min_overlap >= 0.0 && min_overlap <= 1.0)) {
    throw ConfigError("temporal: min_overlap must lie in [0, 1]");
  }
}

RegionMatch match_regions(const Segmentation& current, const Segmentation& previous,
                          double min_overlap) {
  if (current.regions.height != previous.regions.height ||
      current.regions.width != previous.regions.width) {
    throw ShapeError("match_regions: segmentations differ in size");
  }
  const std::size_t prev_count = previous.count();
  std::vector<std::uint64_t> keys(current.regions.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    keys[i] = static_cast<std::uint64_t>(current.regions.labels[i]) * prev_count +
              static_cast<std::uint64_t>(previous.regions.labels[i]);
  }
  std::sort(keys.begin(), keys.end());

  std::vector<std::size_t> best_overlap(current.count(), 0);
  RegionMatch match(current.count());
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    const std::size_t cur = keys[i] / prev_count, prev = keys[i] % prev_count;
    // Keys ascend in prev for a fixed cur, so a strict comparison keeps the
    // lowest previous id on ties.
    if (j - i > best_overlap[cur]) {
      best_overlap[cur] = j - i;
      match[cur] = prev;
    }
    i = j;
  }
  for (std::size_t r = 0; r < match.size(); ++r) {
    const double fraction =
        static_cast<double>(best_overlap[r]) / static_cast<double>(current.sizes[r]);
    if (fraction < min_overlap) match[r].reset();
  }
  return match;
}

SmoothResult smooth(const Tensor& region_dists, const Segmentation& seg, const RegionMatch& match,
                    const TrackState* state, const TemporalConfig& config) {
  config.validate();
  require_rank(region_dists, 2, "smooth");
  const std::size_t r = region_dists.dim(0), k = region_dists.dim(1);
  if (r != seg.count() || match.size() != r) {
    throw ShapeError("smooth: " + std::to_string(r) + " distributions, " +
                     std::to_string(seg.count()) + " regions, " + std::to_string(match.size()) +
                     " matches");
  }
  if (state && state->distributions.dim(1) != k) {
    throw ShapeError("smooth: class count changed between frames");
  }
  Tensor out = region_dists;
  if (state && config.alpha > 0.0) {
    const double a = config.alpha;
    for (std::size_t i = 0; i < r; ++i) {
      if (!match[i]) continue;
      const std::size_t p = *match[i];
      if (p >= state->distributions.dim(0)) {
        throw ShapeError("smooth: match refers to missing previous region " + std::to_string(p));
      }
      double total = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double v = a * state->distributions.at(p, c) + (1.0 - a) * region_dists.at(i, c);
        out.at(i, c) = v;
        total += v;
      }
      for (std::size_t c = 0; c < k; ++c) out.at(i, c) /= total;
    }
  }
  out.require_finite("smooth");
  return {out, TrackState{seg, out}};
}

TemporalSmoother::TemporalSmoother(TemporalConfig config) : config_(config) { config_.validate(); }

Tensor TemporalSmoother::step(const Tensor& region_dists, const Segmentation& seg) {
  RegionMatch match(seg.count());
  if (state_) match = match_regions(seg, state_->segmentation, config_.min_overlap);
  SmoothResult result = smooth(region_dists, seg, match, state_ ? &*state_ : nullptr, config_);
  state_ = std::move(result.state);
  return std::move(result.distributions);
}

double flicker_fraction(const LabelMap& a, const LabelMap& b) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError("flicker_fraction: label maps differ in size");
  }
  if (a.size() == 0) return 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) changed += a.labels[i] != b.labels[i];
  return static_cast<double>(changed) / static_cast<double>(a.size());
}

}  // namespace rgbdseg
