#include "rgbdseg/model.hpp"

#include <chrono>

namespace rgbdseg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string stage_name(std::size_t s, const char* what) {
  return "stage" + std::to_string(s + 1) + "." + what;
}

std::size_t as_count(double v, const char* what) {
  if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw DataError(std::string("checkpoint: invalid ") + what);
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

Taxonomy parse_taxonomy(const std::string& text) {
  if (text == "894" || text == "full") return Taxonomy::full;
  if (text == "14") return Taxonomy::clusters14;
  if (text == "4") return Taxonomy::clusters4;
  throw ConfigError("classes must be one of 894, 14, 4 (got '" + text + "')");
}

std::string taxonomy_name(Taxonomy taxonomy) {
  switch (taxonomy) {
    case Taxonomy::full: return "894";
    case Taxonomy::clusters14: return "14";
    case Taxonomy::clusters4: return "4";
  }
  return "?";
}

Model Model::initialize(const NetworkConfig& network, std::size_t hidden_units,
                        std::size_t classes, std::uint64_t seed) {
  network.validate();
  Model m;
  m.network = network;
  m.extractor = FeatureExtractorParams::initialize(network, seed);
  m.classifier = ClassifierParams::initialize(network.feature_channels(), hidden_units, classes,
                                              seed ^ 0x9e3779b97f4a7c15ull);
  return m;
}

PreprocessConfig Model::preprocess() const {
  PreprocessConfig p;
  p.height = network.height;
  p.width = network.width;
  return p;
}

Checkpoint Model::to_checkpoint() const {
  Checkpoint c;
  for (std::size_t s = 0; s < extractor.stages.size(); ++s) {
    c.put(stage_name(s, "kernels"), extractor.stages[s].kernels);
    c.put(stage_name(s, "bias"), extractor.stages[s].bias);
  }
  c.put("clf.layer1.weight", classifier.hidden.weight);
  c.put("clf.layer1.bias", classifier.hidden.bias);
  c.put("clf.layer2.weight", classifier.output.weight);
  c.put("clf.layer2.bias", classifier.output.bias);
  c.put("model.frame", Tensor({2}, {static_cast<double>(network.height),
                                    static_cast<double>(network.width)}));
  c.put("model.taxonomy", Tensor({1}, {static_cast<double>(static_cast<int>(taxonomy))}), DType::u8);
  c.put("train.epoch", Tensor({1}, {static_cast<double>(epochs_done)}));
  return c;
}

Model Model::from_checkpoint(const Checkpoint& ckpt) {
  Model m;
  for (std::size_t s = 0; s < m.extractor.stages.size(); ++s) {
    auto& stage = m.extractor.stages[s];
    stage.kernels = ckpt.get(stage_name(s, "kernels"));
    stage.bias = ckpt.get(stage_name(s, "bias"));
    require_rank(stage.kernels, 4, "checkpoint kernels");
    require_shape(stage.bias, {stage.kernels.dim(0)}, "checkpoint bias");
    stage.zero_grad();
  }
  auto linear = [&](const std::string& prefix) {
    LinearLayerParams p;
    p.weight = ckpt.get(prefix + ".weight");
    p.bias = ckpt.get(prefix + ".bias");
    require_rank(p.weight, 2, "checkpoint weight");
    require_shape(p.bias, {p.weight.dim(0)}, "checkpoint bias");
    p.zero_grad();
    return p;
  };
  m.classifier.hidden = linear("clf.layer1");
  m.classifier.output = linear("clf.layer2");

  const Tensor& k1 = m.extractor.stages[0].kernels;
  m.network.kernel = k1.dim(2);
  m.network.channels[0] = k1.dim(1);
  for (std::size_t s = 0; s < m.extractor.stages.size(); ++s) {
    const Tensor& k = m.extractor.stages[s].kernels;
    if (k.dim(1) != m.network.channels[s] || k.dim(2) != m.network.kernel || k.dim(3) != m.network.kernel) {
      throw DataError("checkpoint: stage " + std::to_string(s + 1) + " kernels " +
                      shape_string(k.shape()) + " do not chain");
    }
    m.network.channels[s + 1] = k.dim(0);
  }
  if (m.classifier.input_features() != m.network.feature_channels() ||
      m.classifier.output.in_features() != m.classifier.hidden_units()) {
    throw DataError("checkpoint: classifier does not match the feature extractor");
  }
  const Tensor& frame = ckpt.get("model.frame");
  require_shape(frame, {2}, "model.frame");
  m.network.height = as_count(frame[0], "frame height");
  m.network.width = as_count(frame[1], "frame width");
  m.network.validate();
  const std::size_t tax = ckpt.contains("model.taxonomy")
                              ? as_count(ckpt.get("model.taxonomy")[0], "taxonomy")
                              : 0;
  if (tax > 2) throw DataError("checkpoint: unknown taxonomy code");
  m.taxonomy = static_cast<Taxonomy>(tax);
  if (ckpt.contains("train.epoch")) m.epochs_done = as_count(ckpt.get("train.epoch")[0], "epoch");
  return m;
}

void Model::save(const std::filesystem::path& path) const { to_checkpoint().save(path); }

Model Model::load(const std::filesystem::path& path) {
  try {
    return from_checkpoint(Checkpoint::load(path));
  } catch (const ShapeError& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

RgbdFrame prepare_frame(const Model& model, const Tensor& rgb, const Tensor& depth,
                        const InferenceOptions& options) {
  PreprocessConfig p = model.preprocess();
  p.lcn_window = options.lcn_window;
  p.lcn_epsilon = options.lcn_epsilon;
  return rescale_frame(rgb, depth, p);
}

FrameResult label_frame(const Model& model, const RgbdFrame& frame, const InferenceOptions& options) {
  const auto start = Clock::now();
  FrameResult r;
  PreprocessConfig p = model.preprocess();
  p.lcn_window = options.lcn_window;
  p.lcn_epsilon = options.lcn_epsilon;

  auto t = Clock::now();
  const Pyramid pyramid = build_pyramid(frame, p);
  r.timings.pyramid = seconds_since(t);

  t = Clock::now();
  const Tensor features = extract_multiscale(pyramid, model.extractor);
  r.timings.features = seconds_since(t);

  t = Clock::now();
  r.distributions = predict_distributions(features, model.classifier);
  if (options.remap) r.distributions = remap_distributions(r.distributions, *options.remap);
  r.convnet = upsample_labels(argmax_labels(r.distributions), NetworkConfig::kStride);
  r.timings.classifier = seconds_since(t);

  if (options.superpixels) {
    t = Clock::now();
    r.segmentation = segment(frame.rgb, options.superpixel);
    r.region_distributions =
        region_distributions_upsampled(r.distributions, *r.segmentation, NetworkConfig::kStride);
    r.labels = assign_region_labels(r.region_distributions, *r.segmentation);
    r.timings.superpixels = seconds_since(t);
  } else {
    r.labels = r.convnet;
  }
  r.timings.total = seconds_since(start);
  return r;
}

VideoLabeler::VideoLabeler(const Model& model, InferenceOptions options,
                           std::optional<TemporalConfig> temporal)
    : model_(model), options_(std::move(options)) {
  if (temporal) {
    if (!options_.superpixels) throw ConfigError("temporal smoothing requires superpixels");
    smoother_.emplace(*temporal);
  }
}

FrameResult VideoLabeler::next(const RgbdFrame& frame) {
  FrameResult r = label_frame(model_, frame, options_);
  if (smoother_) {
    const auto t = Clock::now();
    r.region_distributions = smoother_->step(r.region_distributions, *r.segmentation);
    r.labels = assign_region_labels(r.region_distributions, *r.segmentation);
    r.timings.temporal = seconds_since(t);
    r.timings.total += r.timings.temporal;
  }
  return r;
}

TrainingSample make_training_sample(const Tensor& rgb, const Tensor& depth, const LabelMap& labels,
                                    const ClassMap& to_classes, const PreprocessConfig& preprocess) {
  const RgbdFrame frame = rescale_frame(rgb, depth, preprocess);
  const LabelMap mapped = remap_labels(resize_labels(labels, preprocess.height, preprocess.width), to_classes);
  TrainingSample s;
  s.pyramid = build_pyramid(frame, preprocess);
  s.targets = downsample_majority(mapped, NetworkConfig::kStride).labels;
  return s;
}

}  // namespace rgbdseg
