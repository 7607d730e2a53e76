#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rgbdseg/classifier.hpp"
#include "rgbdseg/convnet.hpp"
#include "rgbdseg/superpixel.hpp"
#include "rgbdseg/synth.hpp"
#include "rgbdseg/temporal.hpp"

namespace rgbdseg {

/// Every tunable of a run. Text form is one "key = value" per line; '#'
/// starts a comment. Unknown keys and malformed values throw ConfigError.
struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::string classes = "894";

  NetworkConfig network;
  std::size_t hidden_units = kHiddenUnits;
  std::size_t lcn_window = 15;
  double lcn_epsilon = 1e-4;

  TrainConfig train;
  std::size_t checkpoint_every = 1;  // epochs between checkpoint writes
  // Stop once the training-set pixel accuracy of an epoch reaches this; 0 disables.
  double target_accuracy = 0.0;

  bool superpixels = true;
  SuperpixelConfig superpixel;
  bool temporal = true;
  TemporalConfig temporal_config;

  // Empty paths fall back to the dataset directory's files.
  std::filesystem::path class_table;
  std::filesystem::path clusters14;
  std::filesystem::path clusters4;
  std::filesystem::path palette;

  SynthConfig synth;  // frame size is taken from the network
  std::size_t synth_train = 4;
  std::size_t synth_test = 2;

  void set(const std::string& key, const std::string& value);
  /// Keys in a fixed order with their current values.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string dump() const;
  void validate() const;

  static RunConfig parse(std::istream& in, const std::string& origin = "<stream>");
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace rgbdseg
