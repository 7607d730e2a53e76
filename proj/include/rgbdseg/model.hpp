#pragma once

#include <filesystem>
#include <optional>

#include "rgbdseg/classifier.hpp"
#include "rgbdseg/container.hpp"
#include "rgbdseg/convnet.hpp"
#include "rgbdseg/metrics.hpp"
#include "rgbdseg/superpixel.hpp"
#include "rgbdseg/temporal.hpp"

namespace rgbdseg {

/// Class space a model predicts in, relative to the dataset's class table.
enum class Taxonomy { full, clusters14, clusters4 };

/// Accepts "894" or "full", "14", "4".
Taxonomy parse_taxonomy(const std::string& text);
std::string taxonomy_name(Taxonomy taxonomy);

/// Feature extractor, classifier and the architecture they were built for.
struct Model {
  NetworkConfig network;
  FeatureExtractorParams extractor;
  ClassifierParams classifier;
  Taxonomy taxonomy = Taxonomy::full;
  std::size_t epochs_done = 0;

  static Model initialize(const NetworkConfig& network, std::size_t hidden_units,
                          std::size_t classes, std::uint64_t seed);

  std::size_t num_classes() const { return classifier.num_classes(); }
  PreprocessConfig preprocess() const;

  // Checkpoint entries: stage{1,2,3}.kernels, stage{1,2,3}.bias,
  // clf.layer{1,2}.weight, clf.layer{1,2}.bias, model.frame (H, W),
  // model.taxonomy and train.epoch.
  Checkpoint to_checkpoint() const;
  static Model from_checkpoint(const Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);
};

struct InferenceOptions {
  std::size_t lcn_window = 15;
  double lcn_epsilon = 1e-4;
  bool superpixels = true;
  SuperpixelConfig superpixel;
  // Applied to the model's distributions before labelling.
  std::optional<ClassMap> remap;
};

/// Wall-clock seconds per stage.
struct FrameTimings {
  double pyramid = 0.0;
  double features = 0.0;
  double classifier = 0.0;
  double superpixels = 0.0;
  double temporal = 0.0;
  double total = 0.0;
};

struct FrameResult {
  Tensor distributions;  // K x h x w at feature resolution, after any remap
  LabelMap convnet;      // per-pixel argmax at frame resolution
  std::optional<Segmentation> segmentation;
  Tensor region_distributions;  // R x K, smoothed when temporal smoothing is on
  LabelMap labels;              // final labels: region argmax, or convnet without superpixels
  FrameTimings timings;
};

/// Rescales a raw frame to the model's input size.
RgbdFrame prepare_frame(const Model& model, const Tensor& rgb, const Tensor& depth,
                        const InferenceOptions& options = {});

/// Pyramid, features, classifier and (optionally) superpixel aggregation on
/// a frame already at the model's input size.
FrameResult label_frame(const Model& model, const RgbdFrame& frame,
                        const InferenceOptions& options = {});

/// Frame sequence labelling; with a temporal config, region distributions
/// are smoothed against the previous frame before labelling.
class VideoLabeler {
 public:
  VideoLabeler(const Model& model, InferenceOptions options,
               std::optional<TemporalConfig> temporal);
  FrameResult next(const RgbdFrame& frame);

 private:
  const Model& model_;
  InferenceOptions options_;
  std::optional<TemporalSmoother> smoother_;
};

/// Pyramid and feature-resolution targets for training. `labels` are raw
/// ids at the frame's own resolution; `to_classes` maps them into the
/// model's classes.
TrainingSample make_training_sample(const Tensor& rgb, const Tensor& depth, const LabelMap& labels,
                                    const ClassMap& to_classes, const PreprocessConfig& preprocess);

}  // namespace rgbdseg
