#pragma once

// Scenario drivers shared by the unit tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <random>

#include "rgbdseg/layers.hpp"
#include "rgbdseg/superpixel.hpp"
#include "rgbdseg/synth.hpp"
#include "rgbdseg/temporal.hpp"

namespace testing {

struct FlickerConfig {
  std::size_t frames = 30;
  std::size_t height = 96;
  std::size_t width = 128;
  std::size_t factor = 4;      // classifier noise lives on a 1/factor grid
  double truth_logit = 2.0;    // logit bonus of the true class
  double logit_noise = 1.5;    // per-frame Gaussian noise on every logit
  double image_noise = 0.01;   // per-frame colour noise before segmentation
};

struct FlickerOutcome {
  double smoothed = 0.0;  // mean flicker fraction with the given alpha
  double raw = 0.0;       // same frames with alpha = 0
};

/// A static synthetic scene observed for `frames` frames. Every frame gets
/// fresh sensor noise (so segmentations differ) and fresh low-resolution
/// classifier noise on top of a distribution that favours the true class.
/// Both runs see identical frames.
inline FlickerOutcome flicker_trial(std::uint64_t seed, double alpha,
                                    const FlickerConfig& fc = {}) {
  using namespace rgbdseg;
  SynthConfig sc;
  sc.height = fc.height;
  sc.width = fc.width;
  const SynthScene scene = generate_scene(sc, seed, 0);
  const std::size_t k = kSynthClassCount - 1;
  const std::size_t lh = fc.height / fc.factor, lw = fc.width / fc.factor;
  const LabelMap truth_low = downsample_majority(scene.labels, fc.factor);

  std::mt19937_64 rng(seed * 7919 + 17);
  std::normal_distribution<double> noise(0.0, 1.0);

  TemporalConfig with;
  with.alpha = alpha;
  TemporalConfig without;
  without.alpha = 0.0;
  TemporalSmoother smooth_on(with), smooth_off(without);

  LabelMap prev_on, prev_off;
  double sum_on = 0.0, sum_off = 0.0;
  for (std::size_t t = 0; t < fc.frames; ++t) {
    Tensor rgb = scene.rgb;
    for (double& v : rgb.values()) v = std::clamp(v + fc.image_noise * noise(rng), 0.0, 1.0);
    const Segmentation seg = segment(rgb);

    Tensor logits({k, lh, lw});
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t y = 0; y < lh; ++y) {
        for (std::size_t x = 0; x < lw; ++x) {
          const std::int32_t raw = truth_low.at(y, x);
          const bool hit = raw > 0 && static_cast<std::size_t>(raw - 1) == c;
          logits.at(c, y, x) = (hit ? fc.truth_logit : 0.0) + fc.logit_noise * noise(rng);
        }
      }
    }
    Tensor dist(logits.shape());
    std::vector<double> in(k), out(k);
    for (std::size_t p = 0; p < lh * lw; ++p) {
      for (std::size_t c = 0; c < k; ++c) in[c] = logits[c * lh * lw + p];
      softmax(in, out);
      for (std::size_t c = 0; c < k; ++c) dist[c * lh * lw + p] = out[c];
    }
    const Tensor regions = region_distributions_upsampled(dist, seg, fc.factor);
    const LabelMap on = assign_region_labels(smooth_on.step(regions, seg), seg);
    const LabelMap off = assign_region_labels(smooth_off.step(regions, seg), seg);
    if (t > 0) {
      sum_on += flicker_fraction(prev_on, on);
      sum_off += flicker_fraction(prev_off, off);
    }
    prev_on = on;
    prev_off = off;
  }
  const auto pairs = static_cast<double>(fc.frames - 1);
  return {sum_on / pairs, sum_off / pairs};
}

}  // namespace testing
