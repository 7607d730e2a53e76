#include "rgbdseg/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <Eigen/Core>

namespace rgbdseg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXd;

Eigen::Map<RowMat> as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return {t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<const RowMat> as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return {t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<Eigen::VectorXd> as_vector(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

// Column-wise softmax in place.
void softmax_columns(ColMat& logits) {
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    auto col = logits.col(j);
    const double peak = col.maxCoeff();
    col = (col.array() - peak).exp();
    col /= col.sum();
  }
}

std::mt19937_64 stream(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

ClassifierParams ClassifierParams::zeros(std::size_t features, std::size_t hidden_units,
                                         std::size_t classes) {
  if (features == 0 || hidden_units == 0 || classes == 0) {
    throw ConfigError("classifier: sizes must be positive");
  }
  return {LinearLayerParams::zeros(hidden_units, features),
          LinearLayerParams::zeros(classes, hidden_units)};
}

ClassifierParams ClassifierParams::initialize(std::size_t features, std::size_t hidden_units,
                                              std::size_t classes, std::uint64_t seed) {
  if (features == 0 || hidden_units == 0 || classes == 0) {
    throw ConfigError("classifier: sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  ClassifierParams p;
  p.hidden = LinearLayerParams::uniform(hidden_units, features, rng);
  p.output = LinearLayerParams::uniform(classes, hidden_units, rng);
  return p;
}

void ClassifierParams::zero_grad() {
  hidden.zero_grad();
  output.zero_grad();
}

Tensor predict_distributions(const Tensor& features, const ClassifierParams& params) {
  require_rank(features, 3, "predict_distributions");
  const std::size_t c = features.dim(0), h = features.dim(1), w = features.dim(2);
  if (c != params.input_features()) {
    throw ShapeError("predict_distributions: features " + shape_string(features.shape()) +
                     " do not match classifier input " + std::to_string(params.input_features()));
  }
  const Tensor flat = features.reshaped({c, h * w});
  Tensor hidden = linear_forward_batch(flat, params.hidden);
  tanh_forward_inplace(hidden);
  Tensor logits = linear_forward_batch(hidden, params.output);
  const std::size_t k = params.num_classes(), n = h * w;
  auto m = as_matrix(logits, k, n);
  Eigen::RowVectorXd peak = m.colwise().maxCoeff();
  m.rowwise() -= peak;
  m = m.array().exp();
  Eigen::RowVectorXd total = m.colwise().sum();
  m.array().rowwise() /= total.array();
  logits.require_finite("predict_distributions");
  return logits.reshaped({k, h, w});
}

Tensor upsample_distributions(const Tensor& distributions, std::size_t factor) {
  return upsample_nearest(distributions, factor);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning rate must be finite and non-negative");
  }
  if (batch_pixels == 0) throw ConfigError("train: batch_pixels must be positive");
}

TrainingLog train(std::span<const TrainingSample> samples, FeatureExtractorParams& extractor,
                  ClassifierParams& classifier, const TrainConfig& config,
                  const EpochCallback& on_epoch, std::size_t first_epoch) {
  config.validate();
  const std::size_t num_classes = classifier.num_classes();
  const std::size_t feat = classifier.input_features();
  const std::size_t hid = classifier.hidden_units();
  if (extractor.output_channels() * kPyramidScales != feat) {
    throw ShapeError("train: extractor produces " +
                     std::to_string(extractor.output_channels() * kPyramidScales) +
                     " features, classifier expects " + std::to_string(feat));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::int32_t t : samples[i].targets) {
      if (t != config.ignore_label && (t < 0 || static_cast<std::size_t>(t) >= num_classes)) {
        throw DataError("train: sample " + std::to_string(i) + " has label " + std::to_string(t) +
                        " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }

  // Features are fixed when the extractor is frozen.
  std::vector<std::optional<Tensor>> frozen(samples.size());

  auto w1 = as_matrix(classifier.hidden.weight, hid, feat);
  auto b1 = as_vector(classifier.hidden.bias);
  auto w2 = as_matrix(classifier.output.weight, num_classes, hid);
  auto b2 = as_vector(classifier.output.bias);
  const double lr = config.learning_rate;

  TrainingLog log;
  for (std::size_t epoch = first_epoch; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    auto order_rng = stream({config.seed, epoch});
    std::shuffle(order.begin(), order.end(), order_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0, counted = 0;

    for (std::size_t index : order) {
      const TrainingSample& sample = samples[index];
      std::optional<MultiscaleTrace> trace;
      const Tensor* features = nullptr;
      if (config.update_extractor) {
        trace = trace_multiscale(sample.pyramid, extractor);
        features = &trace->features;
      } else {
        if (!frozen[index]) frozen[index] = extract_multiscale(sample.pyramid, extractor);
        features = &*frozen[index];
      }
      const std::size_t n = features->dim(1) * features->dim(2);
      if (sample.targets.size() != n) {
        throw ShapeError("train: sample " + std::to_string(index) + " has " +
                         std::to_string(sample.targets.size()) + " targets for " +
                         std::to_string(n) + " feature pixels");
      }
      const auto fmap = as_matrix(*features, feat, n);

      std::vector<std::size_t> pixels;
      for (std::size_t p = 0; p < n; ++p) {
        if (sample.targets[p] != config.ignore_label) pixels.push_back(p);
      }
      if (pixels.empty()) continue;
      auto pixel_rng = stream({config.seed, epoch, index});
      std::shuffle(pixels.begin(), pixels.end(), pixel_rng);

      Tensor grad_features;
      if (config.update_extractor) grad_features = Tensor(features->shape());
      auto gfmap = config.update_extractor ? as_matrix(grad_features, feat, n)
                                           : Eigen::Map<RowMat>(nullptr, 0, 0);

      ColMat x, hidden, probs, grad_hidden, grad_x;
      for (std::size_t start = 0; start < pixels.size(); start += config.batch_pixels) {
        const std::size_t b = std::min(config.batch_pixels, pixels.size() - start);
        const auto bi = static_cast<Eigen::Index>(b);
        x.resize(static_cast<Eigen::Index>(feat), bi);
        for (std::size_t j = 0; j < b; ++j) x.col(static_cast<Eigen::Index>(j)) = fmap.col(static_cast<Eigen::Index>(pixels[start + j]));

        hidden.noalias() = w1 * x;
        hidden.colwise() += b1;
        hidden = hidden.array().tanh();
        probs.noalias() = w2 * hidden;
        probs.colwise() += b2;
        softmax_columns(probs);

        for (std::size_t j = 0; j < b; ++j) {
          const auto col = static_cast<Eigen::Index>(j);
          const auto target = static_cast<Eigen::Index>(sample.targets[pixels[start + j]]);
          const double p = probs(target, col);
          const double loss = -std::log(p);
          if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "train: loss diverged at epoch " << epoch << ", sample " << index << ", pixel "
                << pixels[start + j] << " (p=" << p << ")";
            throw NumericError(msg.str());
          }
          loss_sum += loss;
          Eigen::Index arg = 0;
          probs.col(col).maxCoeff(&arg);
          if (arg == target) ++correct;
          ++counted;
          probs(target, col) -= 1.0;
        }
        // probs now holds dLoss/dlogits for the batch; average over it.
        probs /= static_cast<double>(b);

        grad_hidden.noalias() = w2.transpose() * probs;
        grad_hidden.array() *= 1.0 - hidden.array().square();
        if (config.update_extractor) {
          grad_x.noalias() = w1.transpose() * grad_hidden;
          for (std::size_t j = 0; j < b; ++j) {
            gfmap.col(static_cast<Eigen::Index>(pixels[start + j])) += grad_x.col(static_cast<Eigen::Index>(j));
          }
        }
        w2.noalias() -= lr * probs * hidden.transpose();
        b2.noalias() -= lr * probs.rowwise().sum();
        w1.noalias() -= lr * grad_hidden * x.transpose();
        b1.noalias() -= lr * grad_hidden.rowwise().sum();
      }

      if (config.update_extractor) {
        extractor.zero_grad();
        backward_multiscale(*trace, extractor, grad_features);
        for (auto& stage : extractor.stages) {
          as_vector(stage.kernels) -= lr * as_vector(stage.grad_kernels);
          as_vector(stage.bias) -= lr * as_vector(stage.grad_bias);
          stage.kernels.require_finite("train: extractor kernels");
        }
      }
    }
    classifier.hidden.weight.require_finite("train: classifier weights");

    EpochStats stats;
    stats.epoch = epoch;
    stats.pixels = counted;
    stats.mean_loss = counted ? loss_sum / static_cast<double>(counted) : 0.0;
    stats.pixel_accuracy = counted ? static_cast<double>(correct) / static_cast<double>(counted) : 0.0;
    log.epochs.push_back(stats);
    if (on_epoch && !on_epoch(stats)) break;
  }
  return log;
}

}  // namespace rgbdseg
