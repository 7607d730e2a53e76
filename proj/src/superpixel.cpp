#include "rgbdseg/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>

namespace rgbdseg {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) x = std::exchange(parent_[x], root);
    return root;
  }

  std::uint32_t join(std::uint32_t a, std::uint32_t b) {
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }

  std::size_t size(std::uint32_t root) const { return size_[root]; }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::vector<std::size_t> size_;
};

struct Edge {
  double weight;
  std::uint32_t a, b;
  bool four_connected;
};

std::vector<Edge> build_edges(const Tensor& color) {
  const std::size_t h = color.dim(1), w = color.dim(2), plane = h * w;
  const double* r = color.data();
  const double* g = r + plane;
  const double* bl = g + plane;
  auto dist = [&](std::size_t p, std::size_t q) {
    const double dr = r[p] - r[q], dg = g[p] - g[q], db = bl[p] - bl[q];
    return std::sqrt(dr * dr + dg * dg + db * db);
  };
  std::vector<Edge> edges;
  edges.reserve(plane * 4);
  auto add = [&](std::size_t p, std::size_t q, bool four) {
    edges.push_back({dist(p, q), static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q), four});
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      if (x + 1 < w) add(p, p + 1, true);
      if (y + 1 < h) add(p, p + w, true);
      if (x + 1 < w && y + 1 < h) add(p, p + w + 1, false);
      if (x + 1 < w && y > 0) add(p, p - w + 1, false);
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& l, const Edge& r) { return l.weight < r.weight; });
  return edges;
}

// Repeats passes over the sorted edges until no component below min_size
// can be merged with a neighbour.
void enforce_min_size(DisjointSets& sets, const std::vector<Edge>& edges, std::size_t min_size,
                      bool four_only) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Edge& e : edges) {
      if (four_only && !e.four_connected) continue;
      const std::uint32_t a = sets.find(e.a), b = sets.find(e.b);
      if (a != b && (sets.size(a) < min_size || sets.size(b) < min_size)) {
        sets.join(a, b);
        changed = true;
      }
    }
  }
}

}  // namespace

void SuperpixelConfig::validate() const {
  if (!(k > 0.0)) throw ConfigError("superpixels: k must be positive");
  if (min_size < 1) throw ConfigError("superpixels: min_size must be at least 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("superpixels: sigma must be finite and non-negative");
  }
}

Tensor smooth_color(const Tensor& image, double sigma) {
  require_rank(image, 3, "smooth_color");
  if (sigma <= 0.0) return image;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;

  const std::size_t c = image.dim(0);
  const auto h = static_cast<std::ptrdiff_t>(image.dim(1));
  const auto w = static_cast<std::ptrdiff_t>(image.dim(2));
  Tensor tmp(image.shape()), out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = image.channel(ch).data();
    double* mid = tmp.channel(ch).data();
    double* dst = out.channel(ch).data();
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          const std::ptrdiff_t sx = std::clamp<std::ptrdiff_t>(x + i, 0, w - 1);
          acc += taps[static_cast<std::size_t>(i + radius)] * src[y * w + sx];
        }
        mid[y * w + x] = acc;
      }
    }
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          const std::ptrdiff_t sy = std::clamp<std::ptrdiff_t>(y + i, 0, h - 1);
          acc += taps[static_cast<std::size_t>(i + radius)] * mid[sy * w + x];
        }
        dst[y * w + x] = acc;
      }
    }
  }
  return out;
}

Segmentation segment(const Tensor& rgb, const SuperpixelConfig& config) {
  config.validate();
  require_rank(rgb, 3, "segment");
  if (rgb.dim(0) != 3) throw ShapeError("segment: expected 3 colour channels");
  const std::size_t h = rgb.dim(1), w = rgb.dim(2), n = h * w;
  if (n == 0) throw ShapeError("segment: empty image");
  rgb.require_finite("segment");

  Tensor scaled = rgb;
  for (double& v : scaled.values()) v *= 255.0;
  const std::vector<Edge> edges = build_edges(smooth_color(scaled, config.sigma));

  DisjointSets sets(n);
  std::vector<double> threshold(n, config.k);
  for (const Edge& e : edges) {
    std::uint32_t a = sets.find(e.a), b = sets.find(e.b);
    if (a != b && e.weight <= threshold[a] && e.weight <= threshold[b]) {
      a = sets.join(a, b);
      threshold[a] = e.weight + config.k / static_cast<double>(sets.size(a));
    }
  }
  enforce_min_size(sets, edges, config.min_size, false);

  std::vector<std::uint32_t> owner(n);
  for (std::size_t p = 0; p < n; ++p) owner[p] = sets.find(static_cast<std::uint32_t>(p));

  // Regions joined only through diagonal edges fall apart into their
  // 4-connected parts here.
  DisjointSets pixels(n);
  auto link = [&](std::size_t p, std::size_t q) {
    if (owner[p] != owner[q]) return;
    const auto a = pixels.find(static_cast<std::uint32_t>(p));
    const auto b = pixels.find(static_cast<std::uint32_t>(q));
    if (a != b) pixels.join(a, b);
  };
  for (std::size_t p = 0; p < n; ++p) {
    if ((p % w) + 1 < w) link(p, p + 1);
    if (p + w < n) link(p, p + w);
  }
  enforce_min_size(pixels, edges, config.min_size, true);

  Segmentation seg;
  seg.regions = LabelMap(h, w, 0);
  std::vector<std::int32_t> id_of_root(n, -1);
  for (std::size_t p = 0; p < n; ++p) {
    const auto root = pixels.find(static_cast<std::uint32_t>(p));
    if (id_of_root[root] < 0) {
      id_of_root[root] = static_cast<std::int32_t>(seg.sizes.size());
      seg.sizes.push_back(0);
    }
    seg.regions.labels[p] = id_of_root[root];
    ++seg.sizes[static_cast<std::size_t>(id_of_root[root])];
  }
  return seg;
}

Tensor region_distributions(const Tensor& distributions, const Segmentation& seg) {
  require_rank(distributions, 3, "region_distributions");
  const std::size_t k = distributions.dim(0);
  if (distributions.dim(1) != seg.regions.height || distributions.dim(2) != seg.regions.width) {
    throw ShapeError("region_distributions: distributions " +
                     shape_string(distributions.shape()) + " do not match segmentation " +
                     std::to_string(seg.regions.height) + "x" + std::to_string(seg.regions.width));
  }
  const std::size_t r = seg.count(), plane = seg.regions.size();
  Tensor sums({r, k});
  for (std::size_t c = 0; c < k; ++c) {
    const double* p = distributions.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      sums[static_cast<std::size_t>(seg.regions.labels[i]) * k + c] += p[i];
    }
  }
  for (std::size_t region = 0; region < r; ++region) {
    const auto size = static_cast<double>(seg.sizes[region]);
    for (std::size_t c = 0; c < k; ++c) sums[region * k + c] /= size;
  }
  return sums;
}

Tensor region_distributions_upsampled(const Tensor& distributions, const Segmentation& seg,
                                      std::size_t factor) {
  require_rank(distributions, 3, "region_distributions_upsampled");
  if (factor == 0) throw ShapeError("region_distributions_upsampled: factor must be positive");
  const std::size_t k = distributions.dim(0), h = distributions.dim(1), w = distributions.dim(2);
  if (h * factor != seg.regions.height || w * factor != seg.regions.width) {
    throw ShapeError("region_distributions_upsampled: distributions " +
                     shape_string(distributions.shape()) + " x" + std::to_string(factor) +
                     " do not match segmentation " + std::to_string(seg.regions.height) + "x" +
                     std::to_string(seg.regions.width));
  }
  // Count how many pixels of each region fall into each low-resolution cell.
  const std::size_t cells = h * w;
  std::vector<std::uint64_t> keys(seg.regions.size());
  for (std::size_t y = 0; y < seg.regions.height; ++y) {
    for (std::size_t x = 0; x < seg.regions.width; ++x) {
      const std::size_t i = y * seg.regions.width + x;
      keys[i] = static_cast<std::uint64_t>(seg.regions.labels[i]) * cells +
                (y / factor) * w + (x / factor);
    }
  }
  std::sort(keys.begin(), keys.end());
  Tensor sums({seg.count(), k});
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    const std::size_t region = keys[i] / cells, cell = keys[i] % cells;
    const auto count = static_cast<double>(j - i);
    double* row = sums.data() + region * k;
    for (std::size_t c = 0; c < k; ++c) row[c] += count * distributions[c * cells + cell];
    i = j;
  }
  for (std::size_t region = 0; region < seg.count(); ++region) {
    const auto size = static_cast<double>(seg.sizes[region]);
    for (std::size_t c = 0; c < k; ++c) sums[region * k + c] /= size;
  }
  return sums;
}

LabelMap assign_region_labels(const Tensor& region_dists, const Segmentation& seg) {
  require_rank(region_dists, 2, "assign_region_labels");
  if (region_dists.dim(0) != seg.count()) {
    throw ShapeError("assign_region_labels: " + std::to_string(region_dists.dim(0)) +
                     " rows for " + std::to_string(seg.count()) + " regions");
  }
  const std::size_t k = region_dists.dim(1);
  std::vector<std::int32_t> best(seg.count(), 0);
  for (std::size_t region = 0; region < seg.count(); ++region) {
    const double* row = region_dists.data() + region * k;
    best[region] = static_cast<std::int32_t>(std::max_element(row, row + k) - row);
  }
  LabelMap out(seg.regions.height, seg.regions.width, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.labels[i] = best[static_cast<std::size_t>(seg.regions.labels[i])];
  }
  return out;
}

LabelMap aggregate(const Tensor& distributions, const Segmentation& seg) {
  return assign_region_labels(region_distributions(distributions, seg), seg);
}

}  // namespace rgbdseg
