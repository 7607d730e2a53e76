#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rgbdseg/dataset.hpp"
#include "rgbdseg/model.hpp"
#include "rgbdseg/render.hpp"
#include "rgbdseg/run_config.hpp"

namespace rgbdseg {

/// The raw-id class table and cluster maps of a run. Paths set in the run
/// config win over the dataset directory's files; missing maps only fail
/// when they are needed.
class ClassMaps {
 public:
  static ClassMaps resolve(const RunConfig& config,
                           const std::optional<std::filesystem::path>& dataset_dir);

  const ClassMap& table() const;
  /// Full classes -> the given taxonomy.
  ClassMap full_to(Taxonomy taxonomy) const;
  /// Raw ids -> the given taxonomy.
  ClassMap raw_to(Taxonomy taxonomy) const;
  /// Model classes in `from` -> `to`, derived through the full classes.
  /// Throws ConfigError when `from` is not a refinement of `to`.
  ClassMap between(Taxonomy from, Taxonomy to) const;

 private:
  std::optional<ClassMap> table_;
  std::optional<ClassMap> clusters14_;
  std::optional<ClassMap> clusters4_;
  std::string where_;
};

InferenceOptions inference_options(const RunConfig& config);
Palette resolve_palette(const RunConfig& config);

/// Trains on the dataset's train split and writes the checkpoint every
/// `checkpoint_every` epochs and at the end. With `resume` and an existing
/// checkpoint, training continues from its recorded epoch. The config and
/// per-epoch statistics go to `log` and to "<checkpoint>.log".
Model run_train(const RunConfig& config, const std::filesystem::path& dataset_dir,
                const std::filesystem::path& checkpoint, bool resume, std::ostream& log);

struct EvalReport {
  EvaluationSummary convnet;
  std::optional<EvaluationSummary> superpixels;
  std::vector<double> frame_seconds;
  std::string text;
};

/// Labels every frame of `dataset` (frame-parallel over `workers` threads;
/// results do not depend on the worker count) and scores them against
/// ground truth mapped through `raw_to_eval`. `options.remap` must map the
/// model's classes to the same evaluation classes.
EvalReport evaluate(const Model& model, const Dataset& dataset, const ClassMap& raw_to_eval,
                    const InferenceOptions& options, std::size_t workers);

EvalReport run_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                    const std::filesystem::path& dataset_dir, const std::string& split,
                    std::ostream& log);

/// Labels one frame and writes a palette PNG of the final label map.
FrameResult run_label(const RunConfig& config, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& rgb, const std::filesystem::path& depth,
                      const std::filesystem::path& out_png, std::ostream& log);

/// Labels the numbered frames of `frame_dir`, writing {index}.labels.rgdt
/// and {index}.png into `out_dir`. Smoothing follows config.temporal.
std::vector<FrameResult> run_label_video(const RunConfig& config,
                                         const std::filesystem::path& checkpoint,
                                         const std::filesystem::path& frame_dir,
                                         const std::filesystem::path& out_dir, std::ostream& log);

void run_synth(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace rgbdseg
