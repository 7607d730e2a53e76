#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "rgbdseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rgbdseg;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> classes;
  bool no_superpixels = false;
  std::optional<double> temporal_alpha;
};

RunConfig build_config(const CommonFlags& flags) {
  RunConfig config = flags.config_path.empty() ? RunConfig{} : RunConfig::load(flags.config_path);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.workers) config.workers = *flags.workers;
  if (flags.classes) config.set("classes", *flags.classes);
  if (flags.no_superpixels) config.superpixels = false;
  if (flags.temporal_alpha) config.temporal_config.alpha = *flags.temporal_alpha;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RGB-D multiscale convnet scene labeling"};
  app.require_subcommand(1);

  CommonFlags flags;
  app.add_option("--config", flags.config_path, "key = value run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "random seed");
  app.add_option("--workers", flags.workers, "frame-parallel evaluation threads");
  app.add_option("--classes", flags.classes, "class taxonomy")->check(CLI::IsMember({"894", "14", "4"}));
  app.add_flag("--no-superpixels", flags.no_superpixels, "label with the convnet argmax only");
  app.add_option("--temporal-alpha", flags.temporal_alpha, "weight of the history in temporal smoothing");
  app.fallthrough();

  fs::path dataset, checkpoint, out, rgb, depth, frames;
  bool resume = false;
  std::optional<std::size_t> epochs;
  std::string split = "test";
  std::string temporal = "on";
  std::optional<std::size_t> scenes, test_scenes;
  std::optional<std::string> layout;

  auto* train = app.add_subcommand("train", "train on a dataset directory's train split");
  train->add_option("dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("checkpoint", checkpoint, "output checkpoint")->required();
  train->add_flag("--resume", resume, "continue from an existing checkpoint");
  train->add_option("--epochs", epochs, "total number of epochs");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset split");
  eval->add_option("checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("dataset", dataset)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--split", split, "split to evaluate");

  auto* label = app.add_subcommand("label", "label one frame and write a PNG");
  label->add_option("checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  label->add_option("rgb", rgb, "colour container")->required()->check(CLI::ExistingFile);
  label->add_option("depth", depth, "depth container")->required()->check(CLI::ExistingFile);
  label->add_option("out", out, "output PNG")->required();

  auto* video = app.add_subcommand("label-video", "label a directory of numbered frames");
  video->add_option("checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  video->add_option("frames", frames, "frame directory")->required()->check(CLI::ExistingDirectory);
  video->add_option("out", out, "output directory")->required();
  video->add_option("--temporal", temporal, "temporal smoothing")->check(CLI::IsMember({"on", "off"}));

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("out", out, "output dataset directory")->required();
  synth->add_option("--scenes", scenes, "training scenes");
  synth->add_option("--test", test_scenes, "test scenes");
  synth->add_option("--layout", layout, "room or patches")->check(CLI::IsMember({"room", "patches"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    RunConfig config = build_config(flags);
    if (*train) {
      if (epochs) config.train.epochs = *epochs;
      run_train(config, dataset, checkpoint, resume, std::cout);
    } else if (*eval) {
      run_eval(config, checkpoint, dataset, split, std::cout);
    } else if (*label) {
      run_label(config, checkpoint, rgb, depth, out, std::cout);
    } else if (*video) {
      config.temporal = temporal == "on";
      run_label_video(config, checkpoint, frames, out, std::cout);
    } else if (*synth) {
      if (scenes) config.synth_train = *scenes;
      if (test_scenes) config.synth_test = *test_scenes;
      if (layout) config.set("synth_layout", *layout);
      run_synth(config, out, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
