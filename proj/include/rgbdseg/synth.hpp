#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgbdseg/label_map.hpp"
#include "rgbdseg/metrics.hpp"
#include "rgbdseg/tensor.hpp"

namespace rgbdseg {

/// Raw label ids of generated scenes. 0 is the dataset's "unknown".
enum SynthClass : std::int32_t {
  kSynthUnknown = 0,
  kSynthFloor,
  kSynthCeiling,
  kSynthWall,
  kSynthBed,
  kSynthTable,
  kSynthChair,
  kSynthSofa,
  kSynthBooks,
  kSynthTv,
  kSynthWindow,
  kSynthPicture,
  kSynthObject,
  kSynthCabinet,
  kSynthClassCount
};

enum class SynthLayout {
  // Ceiling band, wall, floor band, then furniture and wall-mounted props.
  room,
  // Random grid of floor, ceiling and wall patches that share one colour
  // distribution and differ only in their depth profile.
  patches,
};

struct SynthConfig {
  std::size_t height = 240;
  std::size_t width = 320;
  SynthLayout layout = SynthLayout::room;
  double floor_fraction = 0.3;    // room: share of rows below the wall
  double ceiling_fraction = 0.2;  // room: share of rows above the wall
  double jitter = 0.05;           // uniform jitter on both fractions
  std::size_t min_objects = 2;
  std::size_t max_objects = 6;
  double color_noise = 0.03;  // per-pixel std, colour in [0,1]
  double depth_noise = 0.003; // per-pixel std in metres

  void validate() const;
};

/// One generated frame: colour quantized to 8 bits, depth to float32,
/// labels as raw SynthClass ids.
struct SynthScene {
  Tensor rgb;    // 3 x H x W in [0,1]
  Tensor depth;  // 1 x H x W, metres
  LabelMap labels;
};

/// Deterministic in (config, seed, index).
SynthScene generate_scene(const SynthConfig& config, std::uint64_t seed, std::size_t index);

/// Names of raw ids 1..13.
std::vector<std::string> synth_class_names();
/// Raw id -> full class (id - 1); unknown is ignored.
ClassMap synth_class_table();
/// Full classes -> 13 named clusters.
ClassMap synth_clusters14();
/// Full classes -> Ground, Furniture, Props, Structure.
ClassMap synth_clusters4();

}  // namespace rgbdseg
