#include "rgbdseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rgbdseg/container.hpp"

namespace rgbdseg {

namespace fs = std::filesystem;

namespace {

Tensor as_plane(Tensor t, const fs::path& path) {
  if (t.rank() == 2) return t.reshaped({1, t.dim(0), t.dim(1)});
  if (t.rank() == 3 && t.dim(0) == 1) return t;
  throw DataError(path.string() + ": expected H x W or 1 x H x W, got " + shape_string(t.shape()));
}

double dtype_scale(DType dtype) {
  switch (dtype) {
    case DType::u8: return 255.0;
    case DType::u16: return 65535.0;
    default: return 1.0;
  }
}

fs::path sample_path(const fs::path& dir, std::size_t index, const char* kind) {
  return dir / (std::to_string(index) + "." + kind + ".rgdt");
}

}  // namespace

Tensor read_color(const fs::path& path) {
  Container c = load_container(path);
  if (c.tensor.rank() != 3 || c.tensor.dim(0) != 3) {
    throw DataError(path.string() + ": colour must be 3 x H x W, got " + shape_string(c.tensor.shape()));
  }
  const double scale = dtype_scale(c.dtype);
  Tensor rgb = std::move(c.tensor);
  for (double& v : rgb.values()) {
    v /= scale;
    if (!(v >= 0.0 && v <= 1.0)) throw DataError(path.string() + ": colour outside [0, 1]");
  }
  return rgb;
}

Tensor read_depth(const fs::path& path) {
  Container c = load_container(path);
  Tensor depth = as_plane(std::move(c.tensor), path);
  if (c.dtype == DType::u8) throw DataError(path.string() + ": u8 depth is not supported");
  if (c.dtype == DType::u16) {
    for (double& v : depth.values()) v /= 1000.0;
  }
  return depth;
}

LabelMap read_labels(const fs::path& path) {
  Container c = load_container(path);
  if (c.dtype != DType::u16 && c.dtype != DType::u8) {
    throw DataError(path.string() + ": labels must be u16, got " + dtype_name(c.dtype));
  }
  const Tensor plane = as_plane(std::move(c.tensor), path);
  LabelMap labels(plane.dim(1), plane.dim(2));
  for (std::size_t i = 0; i < labels.size(); ++i) labels.labels[i] = static_cast<std::int32_t>(plane[i]);
  return labels;
}

void write_color(const fs::path& path, const Tensor& rgb) {
  require_rank(rgb, 3, "write_color");
  Tensor bytes = rgb;
  for (double& v : bytes.values()) v = std::round(v * 255.0);
  save_container(path, bytes, DType::u8);
}

void write_depth(const fs::path& path, const Tensor& depth) {
  save_container(path, depth, DType::f32);
}

void write_labels(const fs::path& path, const LabelMap& labels) {
  Tensor t({labels.height, labels.width});
  for (std::size_t i = 0; i < labels.size(); ++i) t[i] = labels.labels[i];
  save_container(path, t, DType::u16);
}

std::vector<std::size_t> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  static const std::string suffix = ".rgb.rgdt";
  std::vector<std::size_t> indices;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() <= suffix.size() || !name.ends_with(suffix)) continue;
    const std::string stem = name.substr(0, name.size() - suffix.size());
    if (!std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    indices.push_back(std::stoull(stem));
  }
  std::sort(indices.begin(), indices.end());
  return indices;
}

Dataset Dataset::open(const fs::path& root, const std::string& split) {
  Dataset d;
  d.root_ = root;
  d.split_ = split;
  d.indices_ = list_frames(root / split);
  if (d.indices_.empty()) throw DataError("no samples in " + (root / split).string());
  return d;
}

DatasetSample Dataset::load(std::size_t position) const {
  if (position >= indices_.size()) throw DataError("dataset: position out of range");
  const fs::path dir = root_ / split_;
  DatasetSample s;
  s.index = indices_[position];
  s.rgb = read_color(sample_path(dir, s.index, "rgb"));
  s.depth = read_depth(sample_path(dir, s.index, "depth"));
  s.labels = read_labels(sample_path(dir, s.index, "labels"));
  const std::size_t h = s.rgb.dim(1), w = s.rgb.dim(2);
  if (s.depth.dim(1) != h || s.depth.dim(2) != w || s.labels.height != h || s.labels.width != w) {
    throw DataError((dir / std::to_string(s.index)).string() + ": rgb " + shape_string(s.rgb.shape()) +
                    ", depth " + shape_string(s.depth.shape()) + " and labels " +
                    std::to_string(s.labels.height) + "x" + std::to_string(s.labels.width) +
                    " disagree");
  }
  return s;
}

void write_sample(const fs::path& root, const std::string& split, std::size_t index,
                  const Tensor& rgb, const Tensor& depth, const LabelMap& labels) {
  const fs::path dir = root / split;
  fs::create_directories(dir);
  write_color(sample_path(dir, index, "rgb"), rgb);
  write_depth(sample_path(dir, index, "depth"), depth);
  write_labels(sample_path(dir, index, "labels"), labels);
}

void write_synth_dataset(const fs::path& root, const SynthDatasetSpec& spec) {
  spec.scene.validate();
  fs::create_directories(root);
  synth_class_table().save(root / kClassTableFile);
  synth_clusters14().save(root / kClusters14File);
  synth_clusters4().save(root / kClusters4File);
  for (std::size_t i = 0; i < spec.train + spec.test; ++i) {
    const SynthScene scene = generate_scene(spec.scene, spec.seed, i);
    write_sample(root, i < spec.train ? "train" : "test", i, scene.rgb, scene.depth, scene.labels);
  }
}

}  // namespace rgbdseg
