#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rgbdseg/label_map.hpp"
#include "rgbdseg/tensor.hpp"

namespace rgbdseg {

/// Surjective mapping from source class ids onto contiguous target ids,
/// with kIgnoreLabel marking sources excluded from evaluation.
///
/// Text form, one source per line: "source_id<TAB>target_id<TAB>name",
/// where name is the target's name and target_id -1 means ignore. Blank
/// lines and lines starting with '#' are skipped. Sources up to the largest
/// listed id that are not listed are ignored.
class ClassMap {
 public:
  ClassMap() = default;
  ClassMap(std::vector<std::int32_t> target_of, std::vector<std::string> names);

  static ClassMap identity(std::size_t count, std::vector<std::string> names = {});
  static ClassMap parse(std::istream& in, const std::string& origin = "<stream>");
  static ClassMap load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  std::size_t source_count() const { return target_of_.size(); }
  std::size_t target_count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::int32_t>& targets() const { return target_of_; }

  /// Target of a source id; kIgnoreLabel maps to itself.
  std::int32_t map(std::int32_t source) const;

  /// Applies this map, then `next` (whose sources are this map's targets).
  ClassMap then(const ClassMap& next) const;

 private:
  std::vector<std::int32_t> target_of_;
  std::vector<std::string> names_;
};

/// Sums member probabilities per target. Mass on ignored sources is dropped
/// and the remaining mass renormalized.
Tensor remap_distributions(const Tensor& distributions, const ClassMap& map);
LabelMap remap_labels(const LabelMap& labels, const ClassMap& map);

/// Rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
  /// Skips pixels whose truth is kIgnoreLabel.
  void add(const LabelMap& truth, const LabelMap& predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t diagonal_sum() const;

  /// Merges rows and columns through `map`; ignored targets drop out.
  ConfusionMatrix remapped(const ClassMap& map) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

/// Row-normalized diagonal; empty for classes without ground truth.
std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm);

/// Mean of the row-normalized diagonal over classes with ground truth.
double classwise_accuracy(const ConfusionMatrix& cm);

struct ImageCount {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
};

struct PixelwiseAccuracy {
  double mean = 0.0;    // mean of per-image accuracies
  double median = 0.0;
  double stddev = 0.0;  // population standard deviation
  double pooled = 0.0;  // sum correct / sum total
  std::size_t images = 0;
};

/// Images without evaluated pixels are skipped.
PixelwiseAccuracy pixelwise_accuracy(std::span<const ImageCount> per_image);

ImageCount count_correct(const LabelMap& truth, const LabelMap& predicted);

struct EvaluationSummary {
  std::string title;
  std::vector<std::string> class_names;
  ConfusionMatrix confusion;
  PixelwiseAccuracy pixels;
};

/// Aligned per-class table followed by machine-readable key=value lines.
std::string format_report(const EvaluationSummary& summary);

}  // namespace rgbdseg
