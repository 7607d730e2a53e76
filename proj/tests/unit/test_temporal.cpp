#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rgbdseg/temporal.hpp"
#include "scenarios.hpp"
#include "support.hpp"

using namespace rgbdseg;
using testing::random_tensor;

namespace {

Segmentation from_labels(LabelMap labels) {
  Segmentation seg;
  std::int32_t top = -1;
  for (std::int32_t l : labels.labels) top = std::max(top, l);
  seg.sizes.assign(static_cast<std::size_t>(top + 1), 0);
  for (std::int32_t l : labels.labels) ++seg.sizes[static_cast<std::size_t>(l)];
  seg.regions = std::move(labels);
  return seg;
}

// Vertical stripes of the given width, offset by `shift` columns.
Segmentation stripes(std::size_t h, std::size_t w, std::size_t stripe, std::size_t shift) {
  LabelMap m(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      m.at(y, x) = static_cast<std::int32_t>(std::min(x + shift, w - 1) / stripe);
    }
  }
  return from_labels(std::move(m));
}

// One region per cell of a grid, offset by `shift` pixels with wraparound
// so every cell keeps its full size.
Segmentation cells(std::size_t n, std::size_t cell, std::size_t shift) {
  LabelMap m(n, n);
  const std::size_t per_row = n / cell;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      m.at(y, x) = static_cast<std::int32_t>(((y + shift) % n / cell) * per_row + (x + shift) % n / cell);
    }
  }
  // Relabel to contiguous ids.
  std::vector<std::int32_t> id(per_row * per_row, -1);
  std::int32_t next = 0;
  for (auto& l : m.labels) {
    auto& slot = id[static_cast<std::size_t>(l)];
    if (slot < 0) slot = next++;
    l = slot;
  }
  return from_labels(std::move(m));
}

RegionMatch oracle_match(const Segmentation& cur, const Segmentation& prev, double min_overlap) {
  RegionMatch out(cur.count());
  for (std::size_t r = 0; r < cur.count(); ++r) {
    std::size_t best = 0, best_id = 0;
    for (std::size_t q = 0; q < prev.count(); ++q) {
      std::size_t overlap = 0;
      for (std::size_t i = 0; i < cur.regions.size(); ++i) {
        overlap += cur.regions.labels[i] == static_cast<std::int32_t>(r) &&
                   prev.regions.labels[i] == static_cast<std::int32_t>(q);
      }
      if (overlap > best) {
        best = overlap;
        best_id = q;
      }
    }
    if (static_cast<double>(best) >= min_overlap * static_cast<double>(cur.sizes[r])) out[r] = best_id;
  }
  return out;
}

Tensor random_rows(std::size_t r, std::size_t k, std::mt19937_64& rng) {
  Tensor t = random_tensor({r, k}, rng, 0.01, 1.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += t.at(i, c);
    for (std::size_t c = 0; c < k; ++c) t.at(i, c) /= s;
  }
  return t;
}

}  // namespace

TEST_CASE("match_regions: identical segmentations map to themselves") {
  auto rng = testing::rng_for(1);
  const Segmentation seg = segment(random_tensor({3, 30, 40}, rng, 0.0, 1.0));
  const RegionMatch m = match_regions(seg, seg, 0.3);
  for (std::size_t r = 0; r < seg.count(); ++r) CHECK(m[r] == r);
}

TEST_CASE("match_regions: a one-pixel shift of large regions keeps the identity") {
  const Segmentation prev = stripes(40, 160, 40, 0);
  const Segmentation cur = stripes(40, 160, 40, 1);
  const RegionMatch m = match_regions(cur, prev, 0.3);
  CHECK(m == oracle_match(cur, prev, 0.3));
  for (std::size_t r = 0; r < cur.count(); ++r) CHECK(m[r] == r);
}

TEST_CASE("match_regions: half-cell shifted checkerboard cells find no match at 0.6") {
  const Segmentation prev = cells(32, 8, 0);
  const Segmentation cur = cells(32, 8, 4);
  const RegionMatch m = match_regions(cur, prev, 0.6);
  CHECK(m == oracle_match(cur, prev, 0.6));
  for (const auto& r : m) CHECK_FALSE(r.has_value());
}

TEST_CASE("match_regions: matches a brute-force overlap oracle") {
  auto rng = testing::rng_for(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t h = 3 + rng() % 10, w = 3 + rng() % 10;
    const std::size_t rc = 1 + rng() % 6, rp = 1 + rng() % 6;
    LabelMap a(h, w), b(h, w);
    // Every id appears at least once so the segmentations are valid.
    for (std::size_t i = 0; i < h * w; ++i) {
      a.labels[i] = static_cast<std::int32_t>(i < rc ? i : rng() % rc);
      b.labels[i] = static_cast<std::int32_t>(i < rp ? i : rng() % rp);
    }
    const Segmentation cur = from_labels(a), prev = from_labels(b);
    for (double t : {0.0, 0.3, 0.5, 1.0}) {
      CHECK(match_regions(cur, prev, t) == oracle_match(cur, prev, t));
    }
  }
}

TEST_CASE("match_regions: ties go to the lower previous id") {
  LabelMap cur(1, 4, 0), prev(1, 4);
  prev.labels = {1, 1, 0, 0};
  const RegionMatch m = match_regions(from_labels(cur), from_labels(prev), 0.5);
  CHECK(m[0] == 0u);
  CHECK_THROWS_AS(match_regions(from_labels(LabelMap(2, 2)), from_labels(LabelMap(1, 4)), 0.3),
                  ShapeError);
}

TEST_CASE("smooth: alpha 0 returns the current distributions exactly") {
  auto rng = testing::rng_for(3);
  const Segmentation seg = stripes(4, 12, 4, 0);
  const Tensor prev = random_rows(3, 5, rng), cur = random_rows(3, 5, rng);
  const TrackState state{seg, prev};
  TemporalConfig cfg;
  cfg.alpha = 0.0;
  const RegionMatch m = match_regions(seg, seg, 0.3);
  CHECK(smooth(cur, seg, m, &state, cfg).distributions == cur);
}

TEST_CASE("smooth: first frame and unmatched regions keep their distributions") {
  auto rng = testing::rng_for(4);
  const Segmentation seg = stripes(4, 12, 4, 0);
  const Tensor prev = random_rows(3, 5, rng), cur = random_rows(3, 5, rng);
  CHECK(smooth(cur, seg, RegionMatch(3), nullptr, {}).distributions == cur);
  const TrackState state{seg, prev};
  RegionMatch m(3);
  m[1] = 1;
  const Tensor out = smooth(cur, seg, m, &state, {}).distributions;
  for (std::size_t c = 0; c < 5; ++c) {
    CHECK(out.at(0, c) == cur.at(0, c));
    CHECK(out.at(2, c) == cur.at(2, c));
    CHECK(out.at(1, c) == doctest::Approx(0.7 * prev.at(1, c) + 0.3 * cur.at(1, c)).epsilon(1e-12));
  }
}

TEST_CASE("smooth: a constant video converges geometrically to the constant") {
  auto rng = testing::rng_for(5);
  const Segmentation seg = stripes(6, 18, 6, 0);
  const Tensor start = random_rows(3, 4, rng), target = random_rows(3, 4, rng);
  TemporalConfig cfg;
  cfg.alpha = 0.5;
  TemporalSmoother sm(cfg);
  sm.step(start, seg);
  Tensor out;
  for (int t = 1; t <= 30; ++t) {
    out = sm.step(target, seg);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double expect = target[i] + std::pow(0.5, t) * (start[i] - target[i]);
      REQUIRE(std::fabs(out[i] - expect) < 1e-12);
    }
  }
  CHECK(testing::max_abs_diff(out, target) < 1e-6);
}

TEST_CASE("smooth: a one-frame flip is absorbed when the margin beats flip*(1-alpha)/alpha") {
  auto rng = testing::rng_for(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Segmentation seg = from_labels(LabelMap(2, 2, 0));
  const RegionMatch m{0u};
  std::size_t kept = 0, flipped = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const double alpha = 0.05 + 0.9 * u(rng);
    // Two classes: history favours class 0 by `margin`, the frame favours
    // class 1 by `flip`.
    const double margin = u(rng), flip = u(rng);
    Tensor prev({1, 2}), cur({1, 2});
    prev[0] = 0.5 + margin / 2;
    prev[1] = 0.5 - margin / 2;
    cur[0] = 0.5 - flip / 2;
    cur[1] = 0.5 + flip / 2;
    const double bound = flip * (1.0 - alpha) / alpha;
    if (std::fabs(margin - bound) < 1e-9) continue;
    TemporalConfig cfg;
    cfg.alpha = alpha;
    const TrackState state{seg, prev};
    const Tensor out = smooth(cur, seg, m, &state, cfg).distributions;
    const bool unchanged = out[0] > out[1];
    CHECK(unchanged == (margin > bound));
    (unchanged ? kept : flipped) += 1;
  }
  CHECK(kept > 50);
  CHECK(flipped > 50);
}

TEST_CASE("smooth: outputs stay normalized") {
  auto rng = testing::rng_for(7);
  TemporalSmoother sm;
  for (int t = 0; t < 20; ++t) {
    Tensor img = random_tensor({3, 24, 32}, rng, 0.0, 1.0);
    const Segmentation seg = segment(img);
    const Tensor out = sm.step(random_rows(seg.count(), 6, rng), seg);
    for (std::size_t r = 0; r < seg.count(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 6; ++c) s += out.at(r, c);
      CHECK(std::fabs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("smooth: shape and configuration errors") {
  const Segmentation seg = stripes(4, 8, 4, 0);
  TemporalConfig bad;
  bad.alpha = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.alpha = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.min_overlap = 1.5;
  CHECK_THROWS_AS(TemporalSmoother{bad}, ConfigError);
  CHECK_THROWS_AS(smooth(Tensor({3, 2}), seg, RegionMatch(3), nullptr, {}), ShapeError);
  const TrackState state{seg, Tensor({2, 3}, 0.5)};
  CHECK_THROWS_AS(smooth(Tensor({2, 2}, 0.5), seg, RegionMatch(2), &state, {}), ShapeError);
}

TEST_CASE("flicker_fraction: counts changed pixels") {
  LabelMap a(2, 2, 1), b(2, 2, 1);
  CHECK(flicker_fraction(a, b) == 0.0);
  b.at(1, 0) = 3;
  CHECK(flicker_fraction(a, b) == 0.25);
  CHECK_THROWS_AS(flicker_fraction(a, LabelMap(1, 4)), ShapeError);
}

TEST_CASE("temporal smoothing lowers flicker on static noisy videos") {
  std::size_t wins = 0;
  const std::size_t trials = 20;
  for (std::uint64_t seed = 0; seed < trials; ++seed) {
    const auto r = testing::flicker_trial(1000 + seed, 0.7);
    if (r.smoothed < r.raw) ++wins;
  }
  MESSAGE("smoothing won " << wins << "/" << trials);
  CHECK(wins >= 19);
}
