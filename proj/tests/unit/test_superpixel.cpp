#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>

#include "rgbdseg/layers.hpp"
#include "rgbdseg/superpixel.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace rgbdseg;
using testing::max_abs_diff;
using testing::oracle_segment;
using testing::patchy_image;
using testing::random_tensor;

namespace {

bool four_connected(const Segmentation& seg, std::size_t region) {
  const LabelMap& m = seg.regions;
  const auto target = static_cast<std::int32_t>(region);
  std::vector<char> seen(m.size(), 0);
  std::size_t start = m.size();
  for (std::size_t p = 0; p < m.size(); ++p) {
    if (m.labels[p] == target) {
      start = p;
      break;
    }
  }
  if (start == m.size()) return false;
  std::deque<std::size_t> queue{start};
  seen[start] = 1;
  std::size_t reached = 0;
  while (!queue.empty()) {
    const std::size_t p = queue.front();
    queue.pop_front();
    ++reached;
    const std::size_t y = p / m.width, x = p % m.width;
    const std::size_t nb[4] = {x > 0 ? p - 1 : p, x + 1 < m.width ? p + 1 : p,
                               y > 0 ? p - m.width : p, y + 1 < m.height ? p + m.width : p};
    for (std::size_t q : nb) {
      if (!seen[q] && m.labels[q] == target) {
        seen[q] = 1;
        queue.push_back(q);
      }
    }
  }
  return reached == seg.sizes[region];
}

}  // namespace

TEST_CASE("segment: matches a naive graph segmentation oracle") {
  auto rng = testing::rng_for(1);
  std::size_t multi_region = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t h = 4 + rng() % 12, w = 4 + rng() % 12;
    const double noise = (trial % 4) * 0.15;
    const Tensor img = patchy_image(h, w, rng, noise);
    const double k = std::array<double, 4>{20.0, 100.0, 300.0, 1000.0}[rng() % 4];
    const std::size_t min_size = std::array<std::size_t, 4>{1, 3, 8, 20}[rng() % 4];
    SuperpixelConfig cfg;
    cfg.k = k;
    cfg.min_size = min_size;
    cfg.sigma = 0.0;
    const Segmentation seg = segment(img, cfg);
    INFO("trial " << trial << " " << h << "x" << w << " k=" << k << " min_size=" << min_size);
    CHECK(seg.regions == oracle_segment(img, k, min_size));
    if (seg.count() > 1) ++multi_region;
  }
  CHECK(multi_region >= 20);
}

TEST_CASE("smooth_color: matches a direct 2D Gaussian with clamped borders") {
  auto rng = testing::rng_for(2);
  for (double sigma : {0.5, 0.8, 1.7}) {
    const Tensor img = random_tensor({3, 9, 13}, rng, 0.0, 255.0);
    const Tensor out = smooth_color(img, sigma);
    const long r = static_cast<long>(std::ceil(4.0 * sigma));
    double norm = 0.0;
    for (long i = -r; i <= r; ++i) norm += std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    for (std::size_t c = 0; c < 3; ++c) {
      for (long y = 0; y < 9; ++y) {
        for (long x = 0; x < 13; ++x) {
          double acc = 0.0;
          for (long dy = -r; dy <= r; ++dy) {
            for (long dx = -r; dx <= r; ++dx) {
              const double wt = std::exp(-0.5 * static_cast<double>(dy * dy + dx * dx) / (sigma * sigma)) /
                                (norm * norm);
              const auto sy = static_cast<std::size_t>(std::clamp(y + dy, 0L, 8L));
              const auto sx = static_cast<std::size_t>(std::clamp(x + dx, 0L, 12L));
              acc += wt * img.at(c, sy, sx);
            }
          }
          CHECK(std::fabs(acc - out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x))) <
                1e-10);
        }
      }
    }
  }
  const Tensor img = random_tensor({3, 4, 5}, rng);
  CHECK(smooth_color(img, 0.0) == img);
}

TEST_CASE("segment: a constant image is a single region") {
  for (double v : {0.0, 0.37, 1.0}) {
    const Segmentation seg = segment(Tensor({3, 20, 30}, v));
    CHECK(seg.count() == 1);
    CHECK(seg.sizes[0] == 600);
    CHECK(std::all_of(seg.regions.labels.begin(), seg.regions.labels.end(),
                      [](std::int32_t l) { return l == 0; }));
  }
}

TEST_CASE("segment: two flat halves of distinct colour split along the boundary") {
  Tensor img({3, 20, 30});
  for (std::size_t y = 0; y < 20; ++y) {
    for (std::size_t x = 0; x < 30; ++x) {
      img.at(0, y, x) = x < 13 ? 0.1 : 0.9;
      img.at(1, y, x) = 0.5;
      img.at(2, y, x) = x < 13 ? 0.8 : 0.2;
    }
  }
  SuperpixelConfig cfg;
  cfg.sigma = 0.0;
  const Segmentation seg = segment(img, cfg);
  REQUIRE(seg.count() == 2);
  CHECK(seg.sizes == std::vector<std::size_t>{260, 340});
  for (std::size_t y = 0; y < 20; ++y) {
    for (std::size_t x = 0; x < 30; ++x) CHECK(seg.regions.at(y, x) == (x < 13 ? 0 : 1));
  }
}

TEST_CASE("segment: a huge k merges everything") {
  auto rng = testing::rng_for(3);
  SuperpixelConfig cfg;
  cfg.k = 1e12;
  const Segmentation seg = segment(random_tensor({3, 17, 23}, rng, 0.0, 1.0), cfg);
  CHECK(seg.count() == 1);
}

TEST_CASE("segment: partition, raster ids, 4-connectivity and min_size hold") {
  auto rng = testing::rng_for(4);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t h = 8 + rng() % 40, w = 8 + rng() % 40;
    const Tensor img = trial % 2 ? random_tensor({3, h, w}, rng, 0.0, 1.0)
                                 : patchy_image(h, w, rng, 0.3);
    SuperpixelConfig cfg;
    cfg.k = 10.0 + static_cast<double>(rng() % 500);
    cfg.min_size = 1 + rng() % 30;
    cfg.sigma = (rng() % 3) * 0.5;
    const Segmentation seg = segment(img, cfg);
    INFO("trial " << trial);
    REQUIRE(seg.regions.height == h);
    REQUIRE(seg.regions.width == w);
    REQUIRE(std::accumulate(seg.sizes.begin(), seg.sizes.end(), std::size_t{0}) == h * w);
    std::vector<std::size_t> counted(seg.count(), 0);
    std::int32_t next = 0;
    for (std::int32_t l : seg.regions.labels) {
      REQUIRE(l >= 0);
      REQUIRE(l <= next);
      if (l == next) ++next;
      ++counted[static_cast<std::size_t>(l)];
    }
    CHECK(counted == seg.sizes);
    for (std::size_t r = 0; r < seg.count(); ++r) {
      CHECK(four_connected(seg, r));
      if (h * w >= cfg.min_size) CHECK(seg.sizes[r] >= cfg.min_size);
    }
  }
}

TEST_CASE("segment: deterministic") {
  auto rng = testing::rng_for(5);
  const Tensor img = random_tensor({3, 60, 80}, rng, 0.0, 1.0);
  const Segmentation a = segment(img);
  const Segmentation b = segment(img);
  CHECK(a.regions == b.regions);
  CHECK(a.sizes == b.sizes);
}

TEST_CASE("segment: invalid configuration and input are rejected") {
  SuperpixelConfig cfg;
  cfg.k = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.min_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.sigma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(segment(Tensor({1, 4, 4})), ShapeError);
  CHECK_THROWS_AS(segment(Tensor({3, 0, 4})), ShapeError);
  Tensor bad({3, 4, 4});
  bad[3] = std::nan("");
  CHECK_THROWS_AS(segment(bad), NumericError);
}

TEST_CASE("aggregate: region means and argmax labels match a direct computation") {
  auto rng = testing::rng_for(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t h = 5 + rng() % 20, w = 5 + rng() % 20, k = 2 + rng() % 6;
    SuperpixelConfig cfg;
    cfg.min_size = 4;
    const Segmentation seg = segment(patchy_image(h, w, rng, 0.4), cfg);
    Tensor d = random_tensor({k, h, w}, rng, 0.0, 1.0);
    const Tensor rd = region_distributions(d, seg);
    REQUIRE(rd.shape() == Shape{seg.count(), k});
    for (std::size_t r = 0; r < seg.count(); ++r) {
      for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t p = 0; p < h * w; ++p) {
          if (seg.regions.labels[p] == static_cast<std::int32_t>(r)) {
            s += d[c * h * w + p];
            ++n;
          }
        }
        CHECK(std::fabs(rd.at(r, c) - s / static_cast<double>(n)) < 1e-12);
      }
    }
    const LabelMap labels = aggregate(d, seg);
    for (std::size_t p = 0; p < h * w; ++p) {
      const auto r = static_cast<std::size_t>(seg.regions.labels[p]);
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (rd.at(r, c) > rd.at(r, best)) best = c;
      }
      CHECK(labels.labels[p] == static_cast<std::int32_t>(best));
    }
  }
}

TEST_CASE("aggregate: ties go to the lowest class and labels are constant per region") {
  Segmentation seg;
  seg.regions = LabelMap(1, 4);
  seg.regions.labels = {0, 0, 1, 1};
  seg.sizes = {2, 2};
  Tensor d({3, 1, 4});
  // Region 0: classes 1 and 2 tie; region 1: class 0 wins on average.
  d.at(1, 0, 0) = 1.0;
  d.at(2, 0, 1) = 1.0;
  d.at(0, 0, 2) = 0.6;
  d.at(2, 0, 2) = 0.4;
  d.at(0, 0, 3) = 0.6;
  d.at(1, 0, 3) = 0.4;
  const LabelMap out = aggregate(d, seg);
  CHECK(out.labels == std::vector<std::int32_t>{1, 1, 0, 0});
}

TEST_CASE("region_distributions_upsampled: equals aggregation of the upsampled map") {
  auto rng = testing::rng_for(7);
  for (std::size_t factor : {1u, 2u, 4u}) {
    const std::size_t h = 6, w = 9, k = 5;
    const Tensor low = random_tensor({k, h, w}, rng, 0.0, 1.0);
    const Segmentation seg = segment(random_tensor({3, h * factor, w * factor}, rng, 0.0, 1.0));
    const Tensor direct = region_distributions(upsample_nearest(low, factor), seg);
    const Tensor fast = region_distributions_upsampled(low, seg, factor);
    CHECK(max_abs_diff(direct, fast) < 1e-12);
  }
  const Segmentation seg = segment(Tensor({3, 8, 8}, 0.5));
  CHECK_THROWS_AS(region_distributions_upsampled(Tensor({2, 3, 2}), seg, 4), ShapeError);
  CHECK_THROWS_AS(region_distributions(Tensor({2, 4, 8}), seg), ShapeError);
  CHECK_THROWS_AS(assign_region_labels(Tensor({2, 2}), seg), ShapeError);
}
