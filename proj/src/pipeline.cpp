#include "rgbdseg/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

namespace rgbdseg {

namespace fs = std::filesystem;

namespace {

std::optional<ClassMap> load_optional(const fs::path& configured, const std::optional<fs::path>& dir,
                                      const char* file) {
  if (!configured.empty()) return ClassMap::load(configured);
  if (dir && fs::exists(*dir / file)) return ClassMap::load(*dir / file);
  return std::nullopt;
}

// Writes to two streams at once.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return !EOF;
    const int r1 = a_->sputc(static_cast<char>(c));
    const int r2 = b_->sputc(static_cast<char>(c));
    return r1 == EOF || r2 == EOF ? EOF : c;
  }
  int sync() override { return a_->pubsync() == 0 && b_->pubsync() == 0 ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

std::string frame_label(std::size_t index) { return std::to_string(index); }

void print_timings(std::ostream& log, std::size_t index, const FrameTimings& t) {
  log << std::fixed << std::setprecision(3) << "frame " << index << ": total " << t.total
      << " s (pyramid " << t.pyramid << ", features " << t.features << ", classifier "
      << t.classifier << ", superpixels " << t.superpixels << ", temporal " << t.temporal << ")\n"
      << std::defaultfloat;
}

}  // namespace

ClassMaps ClassMaps::resolve(const RunConfig& config, const std::optional<fs::path>& dataset_dir) {
  ClassMaps m;
  m.table_ = load_optional(config.class_table, dataset_dir, kClassTableFile);
  m.clusters14_ = load_optional(config.clusters14, dataset_dir, kClusters14File);
  m.clusters4_ = load_optional(config.clusters4, dataset_dir, kClusters4File);
  m.where_ = dataset_dir ? dataset_dir->string() : std::string("the run config");
  return m;
}

const ClassMap& ClassMaps::table() const {
  if (!table_) throw ConfigError(std::string("no class table (") + kClassTableFile + ") in " + where_);
  return *table_;
}

ClassMap ClassMaps::full_to(Taxonomy taxonomy) const {
  switch (taxonomy) {
    case Taxonomy::full:
      if (table_) return ClassMap::identity(table_->target_count(), table_->names());
      if (clusters14_) return ClassMap::identity(clusters14_->source_count());
      if (clusters4_) return ClassMap::identity(clusters4_->source_count());
      throw ConfigError("no class maps available in " + where_);
    case Taxonomy::clusters14:
      if (!clusters14_) throw ConfigError(std::string("no ") + kClusters14File + " in " + where_);
      return *clusters14_;
    case Taxonomy::clusters4:
      if (!clusters4_) throw ConfigError(std::string("no ") + kClusters4File + " in " + where_);
      return *clusters4_;
  }
  throw ConfigError("unknown taxonomy");
}

ClassMap ClassMaps::raw_to(Taxonomy taxonomy) const {
  if (taxonomy == Taxonomy::full) return table();
  return table().then(full_to(taxonomy));
}

ClassMap ClassMaps::between(Taxonomy from, Taxonomy to) const {
  const ClassMap a = full_to(from);
  const ClassMap b = full_to(to);
  if (from == to) return ClassMap::identity(b.target_count(), b.names());
  if (from == Taxonomy::full) return b;
  if (a.source_count() != b.source_count()) {
    throw ConfigError("class maps disagree on the number of full classes");
  }
  std::vector<std::int32_t> target(a.target_count(), kIgnoreLabel);
  std::vector<bool> seen(a.target_count(), false);
  for (std::size_t s = 0; s < a.source_count(); ++s) {
    const std::int32_t ta = a.targets()[s];
    if (ta == kIgnoreLabel) continue;
    const auto i = static_cast<std::size_t>(ta);
    const std::int32_t tb = b.targets()[s];
    if (seen[i] && target[i] != tb) {
      throw ConfigError("cannot evaluate " + taxonomy_name(from) + "-class predictions as " +
                        taxonomy_name(to) + " classes: '" + a.names()[i] +
                        "' spans several target classes");
    }
    seen[i] = true;
    target[i] = tb;
  }
  return ClassMap(std::move(target), b.names());
}

InferenceOptions inference_options(const RunConfig& config) {
  InferenceOptions o;
  o.lcn_window = config.lcn_window;
  o.lcn_epsilon = config.lcn_epsilon;
  o.superpixels = config.superpixels;
  o.superpixel = config.superpixel;
  return o;
}

Palette resolve_palette(const RunConfig& config) {
  return config.palette.empty() ? Palette() : Palette::load(config.palette);
}

Model run_train(const RunConfig& config, const fs::path& dataset_dir, const fs::path& checkpoint,
                bool resume, std::ostream& out) {
  config.validate();
  std::ofstream file(fs::path(checkpoint.string() + ".log"), std::ios::app);
  if (!file) throw DataError("cannot write log next to " + checkpoint.string());
  TeeBuf tee(out.rdbuf(), file.rdbuf());
  std::ostream log(&tee);

  log << "# train " << dataset_dir.string() << " -> " << checkpoint.string() << "\n" << config.dump();

  const ClassMaps maps = ClassMaps::resolve(config, dataset_dir);
  const Taxonomy taxonomy = parse_taxonomy(config.classes);
  const ClassMap to_classes = maps.raw_to(taxonomy);

  Model model;
  if (resume && fs::exists(checkpoint)) {
    model = Model::load(checkpoint);
    if (model.network.channels != config.network.channels || model.network.kernel != config.network.kernel ||
        model.network.height != config.network.height || model.network.width != config.network.width ||
        model.classifier.hidden_units() != config.hidden_units ||
        model.num_classes() != to_classes.target_count() || model.taxonomy != taxonomy) {
      throw ConfigError("checkpoint " + checkpoint.string() + " does not match the run config");
    }
    log << "resuming at epoch " << model.epochs_done << "\n";
  } else {
    model = Model::initialize(config.network, config.hidden_units, to_classes.target_count(), config.seed);
    model.taxonomy = taxonomy;
  }

  const Dataset train_set = Dataset::open(dataset_dir, "train");
  log << "train split: " << train_set.size() << " samples, " << to_classes.target_count()
      << " classes\n";
  PreprocessConfig pre = model.preprocess();
  pre.lcn_window = config.lcn_window;
  pre.lcn_epsilon = config.lcn_epsilon;
  std::vector<TrainingSample> samples;
  samples.reserve(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const DatasetSample s = train_set.load(i);
    samples.push_back(make_training_sample(s.rgb, s.depth, s.labels, to_classes, pre));
  }

  TrainConfig tc = config.train;
  tc.seed = config.seed;
  auto on_epoch = [&](const EpochStats& stats) {
    model.epochs_done = stats.epoch + 1;
    log << "epoch " << stats.epoch + 1 << "/" << tc.epochs << " loss " << stats.mean_loss
        << " pixel_accuracy " << stats.pixel_accuracy << " pixels " << stats.pixels << "\n";
    log.flush();
    const bool reached = config.target_accuracy > 0.0 && stats.pixel_accuracy >= config.target_accuracy;
    if (model.epochs_done % config.checkpoint_every == 0 || model.epochs_done == tc.epochs || reached) {
      model.save(checkpoint);
    }
    if (reached) log << "target accuracy reached\n";
    return !reached;
  };
  train(samples, model.extractor, model.classifier, tc, on_epoch, model.epochs_done);
  model.save(checkpoint);
  log.flush();
  return model;
}

EvalReport evaluate(const Model& model, const Dataset& dataset, const ClassMap& raw_to_eval,
                    const InferenceOptions& options, std::size_t workers) {
  const std::size_t classes = raw_to_eval.target_count();
  const std::size_t predicted = options.remap ? options.remap->target_count() : model.num_classes();
  if (predicted != classes) {
    throw ConfigError("evaluation: model predicts " + std::to_string(predicted) +
                      " classes, ground truth has " + std::to_string(classes));
  }
  struct PerImage {
    ConfusionMatrix convnet, superpixels;
    ImageCount convnet_count, superpixel_count;
    double seconds = 0.0;
  };
  std::vector<PerImage> results(dataset.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < dataset.size(); i += stride) {
      const DatasetSample s = dataset.load(i);
      const RgbdFrame frame = prepare_frame(model, s.rgb, s.depth, options);
      const FrameResult r = label_frame(model, frame, options);
      const LabelMap truth = remap_labels(resize_labels(s.labels, frame.height(), frame.width()), raw_to_eval);
      PerImage& p = results[i];
      p.convnet = ConfusionMatrix(classes);
      p.convnet.add(truth, r.convnet);
      p.convnet_count = count_correct(truth, r.convnet);
      if (options.superpixels) {
        p.superpixels = ConfusionMatrix(classes);
        p.superpixels.add(truth, r.labels);
        p.superpixel_count = count_correct(truth, r.labels);
      }
      p.seconds = r.timings.total;
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, dataset.size()));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          work(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  EvalReport report;
  report.convnet = {"convnet only", raw_to_eval.names(), ConfusionMatrix(classes), {}};
  std::vector<ImageCount> convnet_counts, superpixel_counts;
  ConfusionMatrix superpixel_cm(classes);
  for (const PerImage& p : results) {
    report.convnet.confusion += p.convnet;
    convnet_counts.push_back(p.convnet_count);
    if (options.superpixels) {
      superpixel_cm += p.superpixels;
      superpixel_counts.push_back(p.superpixel_count);
    }
    report.frame_seconds.push_back(p.seconds);
  }
  report.convnet.pixels = pixelwise_accuracy(convnet_counts);
  report.text = format_report(report.convnet);
  if (options.superpixels) {
    report.superpixels = EvaluationSummary{"with superpixels", raw_to_eval.names(), superpixel_cm,
                                           pixelwise_accuracy(superpixel_counts)};
    report.text += "\n" + format_report(*report.superpixels);
  }
  return report;
}

EvalReport run_eval(const RunConfig& config, const fs::path& checkpoint, const fs::path& dataset_dir,
                    const std::string& split, std::ostream& log) {
  config.validate();
  log << "# eval " << checkpoint.string() << " on " << dataset_dir.string() << "/" << split << "\n"
      << config.dump();
  const Model model = Model::load(checkpoint);
  const ClassMaps maps = ClassMaps::resolve(config, dataset_dir);
  const Taxonomy target = parse_taxonomy(config.classes);
  InferenceOptions options = inference_options(config);
  if (target != model.taxonomy) options.remap = maps.between(model.taxonomy, target);
  const ClassMap raw_to_eval = maps.raw_to(target);
  if (model.num_classes() != maps.full_to(model.taxonomy).target_count()) {
    throw ConfigError("checkpoint predicts " + std::to_string(model.num_classes()) +
                      " classes, the class maps define " +
                      std::to_string(maps.full_to(model.taxonomy).target_count()));
  }
  const Dataset data = Dataset::open(dataset_dir, split);
  log << split << " split: " << data.size() << " samples\n";
  EvalReport report = evaluate(model, data, raw_to_eval, options, config.workers);
  double total = 0.0;
  for (double s : report.frame_seconds) total += s;
  log << report.text << "mean_frame_seconds=" << total / static_cast<double>(data.size()) << "\n";
  return report;
}

FrameResult run_label(const RunConfig& config, const fs::path& checkpoint, const fs::path& rgb,
                      const fs::path& depth, const fs::path& out_png, std::ostream& log) {
  config.validate();
  const Model model = Model::load(checkpoint);
  InferenceOptions options = inference_options(config);
  const Taxonomy target = parse_taxonomy(config.classes);
  if (target != model.taxonomy) {
    options.remap = ClassMaps::resolve(config, std::nullopt).between(model.taxonomy, target);
  }
  const RgbdFrame frame = prepare_frame(model, read_color(rgb), read_depth(depth), options);
  FrameResult r = label_frame(model, frame, options);
  write_png(out_png, render_labels(r.labels, resolve_palette(config)), r.labels.height, r.labels.width);
  print_timings(log, 0, r.timings);
  return r;
}

std::vector<FrameResult> run_label_video(const RunConfig& config, const fs::path& checkpoint,
                                         const fs::path& frame_dir, const fs::path& out_dir,
                                         std::ostream& log) {
  config.validate();
  const Model model = Model::load(checkpoint);
  InferenceOptions options = inference_options(config);
  const Taxonomy target = parse_taxonomy(config.classes);
  if (target != model.taxonomy) {
    options.remap = ClassMaps::resolve(config, std::nullopt).between(model.taxonomy, target);
  }
  const Palette palette = resolve_palette(config);
  const std::vector<std::size_t> frames = list_frames(frame_dir);
  if (frames.empty()) throw DataError("no frames in " + frame_dir.string());
  fs::create_directories(out_dir);
  log << "# label-video " << frame_dir.string() << " -> " << out_dir.string() << " ("
      << frames.size() << " frames, temporal " << (config.temporal ? "on" : "off") << ")\n";

  VideoLabeler labeler(model, options,
                       config.temporal ? std::optional<TemporalConfig>(config.temporal_config) : std::nullopt);
  std::vector<FrameResult> results;
  double total = 0.0;
  for (std::size_t index : frames) {
    const std::string stem = frame_label(index);
    const RgbdFrame frame = prepare_frame(model, read_color(frame_dir / (stem + ".rgb.rgdt")),
                                          read_depth(frame_dir / (stem + ".depth.rgdt")), options);
    FrameResult r = labeler.next(frame);
    write_labels(out_dir / (stem + ".labels.rgdt"), r.labels);
    write_png(out_dir / (stem + ".png"), render_labels(r.labels, palette), r.labels.height, r.labels.width);
    print_timings(log, index, r.timings);
    total += r.timings.total;
    results.push_back(std::move(r));
  }
  log << "mean_frame_seconds=" << total / static_cast<double>(frames.size()) << "\n";
  return results;
}

void run_synth(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  SynthDatasetSpec spec;
  spec.scene = config.synth;
  spec.scene.height = config.network.height;
  spec.scene.width = config.network.width;
  spec.train = config.synth_train;
  spec.test = config.synth_test;
  spec.seed = config.seed;
  write_synth_dataset(out_dir, spec);
  log << "wrote " << spec.train << " train and " << spec.test << " test scenes ("
      << spec.scene.height << "x" << spec.scene.width << ", seed " << spec.seed << ") to "
      << out_dir.string() << "\n";
}

}  // namespace rgbdseg
