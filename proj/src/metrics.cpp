#include "rgbdseg/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace rgbdseg {

ClassMap::ClassMap(std::vector<std::int32_t> target_of, std::vector<std::string> names)
    : target_of_(std::move(target_of)), names_(std::move(names)) {
  std::vector<bool> used(names_.size(), false);
  for (std::size_t s = 0; s < target_of_.size(); ++s) {
    const std::int32_t t = target_of_[s];
    if (t == kIgnoreLabel) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= names_.size()) {
      throw ConfigError("class map: source " + std::to_string(s) + " maps to invalid target " +
                        std::to_string(t));
    }
    used[static_cast<std::size_t>(t)] = true;
  }
  for (std::size_t t = 0; t < used.size(); ++t) {
    if (!used[t]) {
      throw ConfigError("class map: target " + std::to_string(t) + " ('" + names_[t] +
                        "') has no source class");
    }
  }
}

ClassMap ClassMap::identity(std::size_t count, std::vector<std::string> names) {
  if (names.empty()) {
    for (std::size_t i = 0; i < count; ++i) names.push_back("class" + std::to_string(i));
  }
  if (names.size() != count) throw ConfigError("class map: identity needs one name per class");
  std::vector<std::int32_t> targets(count);
  for (std::size_t i = 0; i < count; ++i) targets[i] = static_cast<std::int32_t>(i);
  return ClassMap(std::move(targets), std::move(names));
}

ClassMap ClassMap::parse(std::istream& in, const std::string& origin) {
  std::map<long, long> entries;
  std::map<long, std::string> target_names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto where = origin + ":" + std::to_string(line_no);
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw ConfigError(where + ": expected source_id<TAB>target_id<TAB>name");
    }
    long source = 0, target = 0;
    try {
      std::size_t used = 0;
      source = std::stol(line.substr(0, tab1), &used);
      if (used != tab1) throw std::invalid_argument("source");
      const std::string t = line.substr(tab1 + 1, tab2 - tab1 - 1);
      target = std::stol(t, &used);
      if (used != t.size()) throw std::invalid_argument("target");
    } catch (const std::logic_error&) {
      throw ConfigError(where + ": malformed ids");
    }
    if (source < 0 || source > 65535) throw ConfigError(where + ": source id out of range");
    if (target < -1) throw ConfigError(where + ": target id must be >= -1");
    if (!entries.emplace(source, target).second) {
      throw ConfigError(where + ": source " + std::to_string(source) + " listed twice");
    }
    if (target >= 0) {
      const std::string name = line.substr(tab2 + 1);
      auto [it, fresh] = target_names.emplace(target, name);
      if (!fresh && it->second != name) {
        throw ConfigError(where + ": target " + std::to_string(target) + " named both '" +
                          it->second + "' and '" + name + "'");
      }
    }
  }
  if (entries.empty()) throw ConfigError(origin + ": empty class map");
  std::vector<std::int32_t> target_of(static_cast<std::size_t>(entries.rbegin()->first) + 1,
                                      kIgnoreLabel);
  for (const auto& [s, t] : entries) target_of[static_cast<std::size_t>(s)] = static_cast<std::int32_t>(t);
  std::vector<std::string> names;
  for (const auto& [t, name] : target_names) {
    if (t != static_cast<long>(names.size())) {
      throw ConfigError(origin + ": target ids are not contiguous (missing " +
                        std::to_string(names.size()) + ")");
    }
    names.push_back(name);
  }
  return ClassMap(std::move(target_of), std::move(names));
}

ClassMap ClassMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open class map " + path.string());
  return parse(in, path.string());
}

void ClassMap::write(std::ostream& out) const {
  for (std::size_t s = 0; s < target_of_.size(); ++s) {
    const std::int32_t t = target_of_[s];
    out << s << '\t' << t << '\t' << (t >= 0 ? names_[static_cast<std::size_t>(t)] : "ignore")
        << '\n';
  }
}

void ClassMap::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write class map " + path.string());
  write(out);
}

std::int32_t ClassMap::map(std::int32_t source) const {
  if (source == kIgnoreLabel) return kIgnoreLabel;
  if (source < 0 || static_cast<std::size_t>(source) >= target_of_.size()) {
    throw DataError("class map: source id " + std::to_string(source) + " outside the map (" +
                    std::to_string(target_of_.size()) + " sources)");
  }
  return target_of_[static_cast<std::size_t>(source)];
}

ClassMap ClassMap::then(const ClassMap& next) const {
  if (next.source_count() != target_count()) {
    throw ConfigError("class map: cannot compose " + std::to_string(target_count()) +
                      " targets with a map over " + std::to_string(next.source_count()) +
                      " sources");
  }
  std::vector<std::int32_t> composed(target_of_.size());
  for (std::size_t s = 0; s < target_of_.size(); ++s) composed[s] = next.map(target_of_[s]);
  return ClassMap(std::move(composed), next.names_);
}

Tensor remap_distributions(const Tensor& distributions, const ClassMap& map) {
  require_rank(distributions, 3, "remap_distributions");
  const std::size_t k = distributions.dim(0), h = distributions.dim(1), w = distributions.dim(2);
  if (k != map.source_count()) {
    throw ShapeError("remap_distributions: " + std::to_string(k) + " classes, map covers " +
                     std::to_string(map.source_count()));
  }
  const std::size_t plane = h * w, targets = map.target_count();
  Tensor out({targets, h, w});
  bool dropped = false;
  for (std::size_t s = 0; s < k; ++s) {
    const std::int32_t t = map.targets()[s];
    if (t == kIgnoreLabel) {
      dropped = true;
      continue;
    }
    const double* src = distributions.data() + s * plane;
    double* dst = out.data() + static_cast<std::size_t>(t) * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
  }
  if (dropped) {
    for (std::size_t i = 0; i < plane; ++i) {
      double total = 0.0;
      for (std::size_t t = 0; t < targets; ++t) total += out[t * plane + i];
      for (std::size_t t = 0; t < targets; ++t) {
        out[t * plane + i] = total > 0.0 ? out[t * plane + i] / total
                                         : 1.0 / static_cast<double>(targets);
      }
    }
  }
  return out;
}

LabelMap remap_labels(const LabelMap& labels, const ClassMap& map) {
  LabelMap out(labels.height, labels.width, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) out.labels[i] = map.map(labels.labels[i]);
  return out;
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= classes_ || predicted >= classes_) {
    throw DataError("confusion matrix: label (" + std::to_string(truth) + ", " +
                    std::to_string(predicted) + ") outside " + std::to_string(classes_) +
                    " classes");
  }
  counts_[truth * classes_ + predicted] += count;
}

void ConfusionMatrix::add(const LabelMap& truth, const LabelMap& predicted) {
  if (truth.height != predicted.height || truth.width != predicted.width) {
    throw ShapeError("confusion matrix: label maps differ in size");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::int32_t t = truth.labels[i];
    if (t == kIgnoreLabel) continue;
    const std::int32_t p = predicted.labels[i];
    if (t < 0 || p < 0) throw DataError("confusion matrix: negative label");
    add(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("confusion matrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts_) sum += c;
  return sum;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t sum = 0;
  for (std::size_t p = 0; p < classes_; ++p) sum += at(truth, p);
  return sum;
}

std::uint64_t ConfusionMatrix::diagonal_sum() const {
  std::uint64_t sum = 0;
  for (std::size_t c = 0; c < classes_; ++c) sum += at(c, c);
  return sum;
}

ConfusionMatrix ConfusionMatrix::remapped(const ClassMap& map) const {
  if (map.source_count() != classes_) {
    throw ShapeError("confusion matrix: map covers " + std::to_string(map.source_count()) +
                     " classes, matrix has " + std::to_string(classes_));
  }
  ConfusionMatrix out(map.target_count());
  for (std::size_t t = 0; t < classes_; ++t) {
    const std::int32_t mt = map.targets()[t];
    if (mt == kIgnoreLabel) continue;
    for (std::size_t p = 0; p < classes_; ++p) {
      const std::int32_t mp = map.targets()[p];
      if (mp == kIgnoreLabel || at(t, p) == 0) continue;
      out.add(static_cast<std::size_t>(mt), static_cast<std::size_t>(mp), at(t, p));
    }
  }
  return out;
}

std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.classes());
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const std::uint64_t row = cm.row_sum(c);
    if (row > 0) out[c] = static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
  }
  return out;
}

double classwise_accuracy(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& acc : per_class_accuracy(cm)) {
    if (!acc) continue;
    sum += *acc;
    ++present;
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

PixelwiseAccuracy pixelwise_accuracy(std::span<const ImageCount> per_image) {
  std::vector<double> acc;
  std::uint64_t correct = 0, total = 0;
  for (const ImageCount& img : per_image) {
    if (img.correct > img.total) throw DataError("pixelwise accuracy: correct exceeds total");
    if (img.total == 0) continue;
    acc.push_back(static_cast<double>(img.correct) / static_cast<double>(img.total));
    correct += img.correct;
    total += img.total;
  }
  PixelwiseAccuracy out;
  out.images = acc.size();
  if (acc.empty()) return out;
  const auto n = static_cast<double>(acc.size());
  double sum = 0.0;
  for (double a : acc) sum += a;
  out.mean = sum / n;
  double sq = 0.0;
  for (double a : acc) sq += (a - out.mean) * (a - out.mean);
  out.stddev = std::sqrt(sq / n);
  std::sort(acc.begin(), acc.end());
  const std::size_t mid = acc.size() / 2;
  out.median = acc.size() % 2 ? acc[mid] : 0.5 * (acc[mid - 1] + acc[mid]);
  out.pooled = static_cast<double>(correct) / static_cast<double>(total);
  return out;
}

ImageCount count_correct(const LabelMap& truth, const LabelMap& predicted) {
  if (truth.height != predicted.height || truth.width != predicted.width) {
    throw ShapeError("count_correct: label maps differ in size");
  }
  ImageCount c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth.labels[i] == kIgnoreLabel) continue;
    ++c.total;
    c.correct += truth.labels[i] == predicted.labels[i];
  }
  return c;
}

namespace {

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    out += std::isalnum(u) ? static_cast<char>(std::tolower(u)) : '_';
  }
  return out;
}

}  // namespace

std::string format_report(const EvaluationSummary& summary) {
  const auto& cm = summary.confusion;
  const auto per_class = per_class_accuracy(cm);
  std::size_t width = 24;
  for (const auto& n : summary.class_names) width = std::max(width, n.size() + 2);

  std::ostringstream out;
  out << "== " << summary.title << " ==\n";
  out << std::left << std::setw(static_cast<int>(width)) << "class" << std::right
      << std::setw(12) << "occurrence" << std::setw(10) << "acc." << '\n';
  const double total = static_cast<double>(std::max<std::uint64_t>(cm.total(), 1));
  out << std::fixed << std::setprecision(1);
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const std::string name = c < summary.class_names.size() ? summary.class_names[c]
                                                            : "class" + std::to_string(c);
    out << std::left << std::setw(static_cast<int>(width)) << name << std::right
        << std::setw(11) << 100.0 * static_cast<double>(cm.row_sum(c)) / total << '%';
    if (per_class[c]) {
      out << std::setw(10) << 100.0 * *per_class[c];
    } else {
      out << std::setw(10) << "-";
    }
    out << '\n';
  }
  auto row = [&](const std::string& label, double v) {
    out << std::left << std::setw(static_cast<int>(width)) << label << std::right
        << std::setw(22) << 100.0 * v << '\n';
  };
  row("Avg. Class Acc.", classwise_accuracy(cm));
  row("Pixel Accuracy (mean)", summary.pixels.mean);
  row("Pixel Accuracy (median)", summary.pixels.median);
  row("Pixel Accuracy (std. dev.)", summary.pixels.stddev);
  row("Pixel Accuracy (pooled)", summary.pixels.pooled);

  const std::string key = slug(summary.title);
  out << std::setprecision(6);
  out << key << ".classwise_accuracy=" << classwise_accuracy(cm) << '\n';
  out << key << ".pixel_accuracy_mean=" << summary.pixels.mean << '\n';
  out << key << ".pixel_accuracy_median=" << summary.pixels.median << '\n';
  out << key << ".pixel_accuracy_stddev=" << summary.pixels.stddev << '\n';
  out << key << ".pixel_accuracy_pooled=" << summary.pixels.pooled << '\n';
  out << key << ".images=" << summary.pixels.images << '\n';
  out << key << ".pixels=" << cm.total() << '\n';
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    if (!per_class[c]) continue;
    const std::string name = c < summary.class_names.size() ? summary.class_names[c]
                                                            : "class" + std::to_string(c);
    out << key << ".class." << slug(name) << '=' << *per_class[c] << '\n';
  }
  return out.str();
}

}  // namespace rgbdseg
