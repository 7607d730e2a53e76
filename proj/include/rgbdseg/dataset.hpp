#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rgbdseg/label_map.hpp"
#include "rgbdseg/metrics.hpp"
#include "rgbdseg/synth.hpp"
#include "rgbdseg/tensor.hpp"

namespace rgbdseg {

// Dataset directory layout:
//   classes.tsv                     raw label id -> full class
//   clusters14.tsv, clusters4.tsv   full class -> cluster
//   {split}/{index}.rgb.rgdt        3 x H x W, u8 (or u16 / float in [0,1])
//   {split}/{index}.depth.rgdt      H x W or 1 x H x W, metres (u16: millimetres)
//   {split}/{index}.labels.rgdt     H x W or 1 x H x W, u16 raw label ids

inline constexpr const char* kClassTableFile = "classes.tsv";
inline constexpr const char* kClusters14File = "clusters14.tsv";
inline constexpr const char* kClusters4File = "clusters4.tsv";

/// Colour container as 3 x H x W in [0,1]; integer dtypes are scaled by
/// their maximum value.
Tensor read_color(const std::filesystem::path& path);
/// Depth container as 1 x H x W metres.
Tensor read_depth(const std::filesystem::path& path);
LabelMap read_labels(const std::filesystem::path& path);

void write_color(const std::filesystem::path& path, const Tensor& rgb);
void write_depth(const std::filesystem::path& path, const Tensor& depth);
void write_labels(const std::filesystem::path& path, const LabelMap& labels);

struct DatasetSample {
  std::size_t index = 0;
  Tensor rgb;
  Tensor depth;
  LabelMap labels;  // raw ids
};

/// Numeric frame indices in `dir` that have a colour container, ascending.
std::vector<std::size_t> list_frames(const std::filesystem::path& dir);

/// One split of a dataset directory. Samples are read on demand.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& root, const std::string& split);

  const std::filesystem::path& root() const { return root_; }
  const std::string& split() const { return split_; }
  std::size_t size() const { return indices_.size(); }
  const std::vector<std::size_t>& indices() const { return indices_; }

  /// Loads the sample at `position` (not its index) and checks that the
  /// three planes agree in size.
  DatasetSample load(std::size_t position) const;

 private:
  std::filesystem::path root_;
  std::string split_;
  std::vector<std::size_t> indices_;
};

void write_sample(const std::filesystem::path& root, const std::string& split, std::size_t index,
                  const Tensor& rgb, const Tensor& depth, const LabelMap& labels);

struct SynthDatasetSpec {
  SynthConfig scene;
  std::size_t train = 4;
  std::size_t test = 2;
  std::uint64_t seed = 1;
};

/// Writes generated train and test splits plus the synthetic class maps.
/// Test scenes continue the index sequence after the training scenes.
void write_synth_dataset(const std::filesystem::path& root, const SynthDatasetSpec& spec);

}  // namespace rgbdseg
