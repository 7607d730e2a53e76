#include "rgbdseg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace rgbdseg {

namespace {

using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, kSynthClassCount> kBaseColor{{
    {0.0, 0.0, 0.0},
    {0.45, 0.33, 0.22},  // floor
    {0.88, 0.88, 0.85},  // ceiling
    {0.78, 0.72, 0.60},  // wall
    {0.55, 0.20, 0.25},  // bed
    {0.50, 0.35, 0.20},  // table
    {0.25, 0.25, 0.45},  // chair
    {0.30, 0.50, 0.30},  // sofa
    {0.70, 0.20, 0.15},  // books
    {0.08, 0.08, 0.10},  // tv
    {0.60, 0.80, 0.95},  // window
    {0.85, 0.55, 0.20},  // picture
    {0.35, 0.65, 0.70},  // object
    {0.62, 0.52, 0.40},  // cabinet
}};

std::mt19937_64 scene_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x5eedu};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Depth along a plane seen in perspective: inverse depth varies linearly
// from 1/from at t=0 to 1/to at t=1.
double perspective(double from, double to, double t) {
  return 1.0 / ((1.0 - t) / from + t / to);
}

struct Canvas {
  std::size_t h, w;
  std::vector<Rgb> color;
  std::vector<double> depth;
  LabelMap labels;

  Canvas(std::size_t height, std::size_t width)
      : h(height), w(width), color(height * width), depth(height * width, 0.0),
        labels(height, width, kSynthUnknown) {}

  void put(std::size_t y, std::size_t x, std::int32_t label, const Rgb& c, double z) {
    const std::size_t i = y * w + x;
    color[i] = c;
    depth[i] = z;
    labels.labels[i] = label;
  }
};

Rgb jittered(const Rgb& base, std::mt19937_64& rng, double amount) {
  Rgb c;
  for (int ch = 0; ch < 3; ++ch) c[ch] = std::clamp(base[ch] * (1.0 + uniform(rng, -amount, amount)), 0.0, 1.0);
  return c;
}

void draw_room(Canvas& canvas, const SynthConfig& cfg, std::mt19937_64& rng) {
  const std::size_t h = canvas.h, w = canvas.w;
  std::array<Rgb, kSynthClassCount> palette;
  for (std::size_t c = 0; c < palette.size(); ++c) palette[c] = jittered(kBaseColor[c], rng, 0.1);

  const double ceil_frac = std::clamp(cfg.ceiling_fraction + uniform(rng, -cfg.jitter, cfg.jitter), 0.0, 1.0);
  const double floor_frac = std::clamp(cfg.floor_fraction + uniform(rng, -cfg.jitter, cfg.jitter), 0.0, 1.0);
  const auto ceil_rows = static_cast<std::size_t>(std::lround(ceil_frac * static_cast<double>(h)));
  const auto floor_rows = std::min(h - ceil_rows, static_cast<std::size_t>(std::lround(floor_frac * static_cast<double>(h))));
  const std::size_t floor_top = h - floor_rows;

  const double wall_depth = uniform(rng, 3.0, 5.0);
  const double slant = uniform(rng, -0.3, 0.3);
  const double floor_near = uniform(rng, 0.8, 1.5);
  const double ceiling_near = uniform(rng, 1.0, 2.0);
  auto wall_at = [&](std::size_t x) {
    return wall_depth + slant * ((static_cast<double>(x) + 0.5) / static_cast<double>(w) - 0.5);
  };
  auto floor_at = [&](std::size_t y, std::size_t x) {
    const double t = (static_cast<double>(y - floor_top) + 0.5) / static_cast<double>(floor_rows);
    return perspective(wall_at(x), floor_near, t);
  };

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (y < ceil_rows) {
        const double t = (static_cast<double>(ceil_rows - y) - 0.5) / static_cast<double>(ceil_rows);
        canvas.put(y, x, kSynthCeiling, palette[kSynthCeiling], perspective(wall_at(x), ceiling_near, t));
      } else if (y >= floor_top) {
        canvas.put(y, x, kSynthFloor, palette[kSynthFloor], floor_at(y, x));
      } else {
        canvas.put(y, x, kSynthWall, palette[kSynthWall], wall_at(x));
      }
    }
  }

  const std::size_t count = cfg.max_objects == 0 ? 0 : uniform_index(rng, cfg.min_objects, cfg.max_objects);
  static constexpr std::array<std::int32_t, 10> kObjects{kSynthBed,   kSynthTable,  kSynthChair,
                                                         kSynthSofa,  kSynthBooks,  kSynthTv,
                                                         kSynthWindow, kSynthPicture, kSynthObject,
                                                         kSynthCabinet};
  const auto dh = static_cast<double>(h), dw = static_cast<double>(w);
  for (std::size_t n = 0; n < count; ++n) {
    const std::int32_t label = kObjects[uniform_index(rng, 0, kObjects.size() - 1)];
    const bool mounted = label == kSynthTv || label == kSynthWindow || label == kSynthPicture ||
                         label == kSynthBooks;
    std::size_t top, bottom, left, right;
    double z;
    const auto ow = std::max<std::size_t>(2, static_cast<std::size_t>(uniform(rng, 0.08, 0.3) * dw));
    left = uniform_index(rng, 0, w - std::min(ow, w));
    right = std::min(w, left + ow);
    if (mounted) {
      if (floor_top <= ceil_rows + 4) continue;
      const std::size_t band = floor_top - ceil_rows;
      const auto oh = std::max<std::size_t>(2, static_cast<std::size_t>(uniform(rng, 0.3, 0.8) * static_cast<double>(band)));
      top = ceil_rows + uniform_index(rng, 0, band - std::min(oh, band));
      bottom = std::min(floor_top, top + oh);
      z = wall_at((left + right) / 2) - 0.05;
    } else {
      if (floor_rows < 4) continue;
      bottom = floor_top + uniform_index(rng, 1, floor_rows);
      const auto oh = std::max<std::size_t>(2, static_cast<std::size_t>(uniform(rng, 0.1, 0.35) * dh));
      top = bottom > oh ? bottom - oh : 0;
      z = floor_at(bottom - 1, (left + right) / 2) - 0.02;
    }
    const Rgb color = jittered(palette[static_cast<std::size_t>(label)], rng, 0.05);
    for (std::size_t y = top; y < bottom; ++y) {
      for (std::size_t x = left; x < right; ++x) {
        if (z < canvas.depth[y * w + x]) canvas.put(y, x, label, color, z);
      }
    }
  }

  // Soft vertical illumination falloff.
  const double light = uniform(rng, 0.0, 0.15);
  for (std::size_t y = 0; y < h; ++y) {
    const double f = 1.0 - light * static_cast<double>(y) / dh;
    for (std::size_t x = 0; x < w; ++x) {
      for (double& v : canvas.color[y * w + x]) v *= f;
    }
  }
}

std::vector<std::size_t> split_points(std::mt19937_64& rng, std::size_t extent, std::size_t parts) {
  std::vector<std::size_t> cuts{0};
  const double step = static_cast<double>(extent) / static_cast<double>(parts);
  for (std::size_t i = 1; i < parts; ++i) {
    const double c = step * (static_cast<double>(i) + uniform(rng, -0.25, 0.25));
    cuts.push_back(static_cast<std::size_t>(std::lround(c)));
  }
  cuts.push_back(extent);
  return cuts;
}

void draw_patches(Canvas& canvas, std::mt19937_64& rng) {
  const Rgb base{uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7)};
  const auto rows = split_points(rng, canvas.h, uniform_index(rng, 2, 3));
  const auto cols = split_points(rng, canvas.w, uniform_index(rng, 2, 4));
  static constexpr std::array<std::int32_t, 3> kKinds{kSynthFloor, kSynthCeiling, kSynthWall};
  for (std::size_t r = 0; r + 1 < rows.size(); ++r) {
    for (std::size_t c = 0; c + 1 < cols.size(); ++c) {
      const std::int32_t label = kKinds[uniform_index(rng, 0, 2)];
      const double brightness = uniform(rng, 0.85, 1.15);
      Rgb color;
      for (int ch = 0; ch < 3; ++ch) color[ch] = std::clamp(base[ch] * brightness, 0.0, 1.0);
      const double near = uniform(rng, 1.0, 2.5);
      const double far = near + uniform(rng, 1.0, 3.0);
      const double flat = uniform(rng, near, far);
      const auto span = static_cast<double>(rows[r + 1] - rows[r]);
      for (std::size_t y = rows[r]; y < rows[r + 1]; ++y) {
        const double t = (static_cast<double>(y - rows[r]) + 0.5) / span;
        double z = flat;
        if (label == kSynthFloor) z = perspective(far, near, t);
        if (label == kSynthCeiling) z = perspective(near, far, t);
        for (std::size_t x = cols[c]; x < cols[c + 1]; ++x) canvas.put(y, x, label, color, z);
      }
    }
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (height == 0 || width == 0) throw ConfigError("synth: frame size must be positive");
  if (min_objects > max_objects) throw ConfigError("synth: min_objects exceeds max_objects");
  for (double v : {floor_fraction, ceiling_fraction}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("synth: fractions must lie in [0, 1]");
  }
  if (floor_fraction + ceiling_fraction > 1.0) {
    throw ConfigError("synth: floor and ceiling fractions exceed the frame");
  }
  if (!(jitter >= 0.0) || !(color_noise >= 0.0) || !(depth_noise >= 0.0)) {
    throw ConfigError("synth: jitter and noise levels must be non-negative");
  }
}

SynthScene generate_scene(const SynthConfig& config, std::uint64_t seed, std::size_t index) {
  config.validate();
  auto rng = scene_rng(seed, index);
  Canvas canvas(config.height, config.width);
  if (config.layout == SynthLayout::room) {
    draw_room(canvas, config, rng);
  } else {
    draw_patches(canvas, rng);
  }

  const std::size_t h = config.height, w = config.width, plane = h * w;
  SynthScene scene{Tensor({3, h, w}), Tensor({1, h, w}), canvas.labels};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double v = canvas.color[i][ch] + config.color_noise * noise(rng);
      scene.rgb[ch * plane + i] = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    }
    const double z = std::max(0.1, canvas.depth[i] + config.depth_noise * noise(rng));
    scene.depth[i] = static_cast<double>(static_cast<float>(z));
  }
  return scene;
}

std::vector<std::string> synth_class_names() {
  return {"floor", "ceiling", "wall", "bed", "table", "chair", "sofa",
          "books", "tv", "window", "picture", "object", "cabinet"};
}

ClassMap synth_class_table() {
  std::vector<std::int32_t> target(kSynthClassCount);
  target[0] = kIgnoreLabel;
  for (std::int32_t i = 1; i < kSynthClassCount; ++i) target[static_cast<std::size_t>(i)] = i - 1;
  return ClassMap(std::move(target), synth_class_names());
}

ClassMap synth_clusters14() {
  std::vector<std::string> names{"floor", "ceiling", "wall", "bed",    "table",  "chair",    "sofa",
                                 "books", "tv",      "window", "deco", "objects", "furniture"};
  std::vector<std::int32_t> target(names.size());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = static_cast<std::int32_t>(i);
  return ClassMap(std::move(target), std::move(names));
}

ClassMap synth_clusters4() {
  // Full classes in synth_class_names() order.
  enum : std::int32_t { ground, furniture, props, structure };
  return ClassMap({ground, structure, structure, furniture, furniture, furniture, furniture, props,
                   props, structure, props, props, structure},
                  {"ground", "furniture", "props", "structure"});
}

}  // namespace rgbdseg
