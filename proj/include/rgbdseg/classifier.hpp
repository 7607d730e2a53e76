#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rgbdseg/convnet.hpp"
#include "rgbdseg/label_map.hpp"
#include "rgbdseg/layers.hpp"

namespace rgbdseg {

/// Two-layer perceptron applied to every feature vector:
/// softmax(W2 tanh(W1 x + b1) + b2).
struct ClassifierParams {
  LinearLayerParams hidden;
  LinearLayerParams output;

  static ClassifierParams zeros(std::size_t features, std::size_t hidden_units,
                                std::size_t classes);
  static ClassifierParams initialize(std::size_t features, std::size_t hidden_units,
                                     std::size_t classes, std::uint64_t seed);

  std::size_t input_features() const { return hidden.in_features(); }
  std::size_t hidden_units() const { return hidden.out_features(); }
  std::size_t num_classes() const { return output.out_features(); }
  void zero_grad();
};

inline constexpr std::size_t kHiddenUnits = 1024;

/// Per-pixel class distributions (K x h x w) for a C x h x w feature map.
Tensor predict_distributions(const Tensor& features, const ClassifierParams& params);

/// Nearest-neighbour upsampling of distributions to frame resolution.
Tensor upsample_distributions(const Tensor& distributions,
                              std::size_t factor = NetworkConfig::kStride);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::uint64_t seed = 1;
  // Pixels per SGD step on the classifier. 1 is plain per-pixel SGD.
  std::size_t batch_pixels = 1;
  std::int32_t ignore_label = kIgnoreLabel;
  // When false only the classifier is trained.
  bool update_extractor = true;

  void validate() const;
};

/// A pyramid and its targets at feature resolution (row-major h x w, class
/// indices in [0, K) or the ignore label).
struct TrainingSample {
  Pyramid pyramid;
  std::vector<std::int32_t> targets;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  // Fraction of pixels whose prediction was right just before their update.
  double pixel_accuracy = 0.0;
  std::size_t pixels = 0;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
};

/// Invoked after every epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochStats&)>;

/// SGD on the summed per-pixel negative log-likelihood. Images are visited
/// in a shuffled order and their labelled pixels in shuffled mini-batches;
/// the classifier is updated after each mini-batch and the shared feature
/// extractor once per image with the accumulated feature gradient. Shuffles
/// depend only on (seed, epoch, sample index), so a run resumed at
/// `first_epoch` continues exactly as an uninterrupted one.
TrainingLog train(std::span<const TrainingSample> samples, FeatureExtractorParams& extractor,
                  ClassifierParams& classifier, const TrainConfig& config,
                  const EpochCallback& on_epoch = {}, std::size_t first_epoch = 0);

}  // namespace rgbdseg
