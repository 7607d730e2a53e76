#include "rgbdseg/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rgbdseg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config: invalid value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw ConfigError("config: invalid boolean '" + value + "' for " + key);
}

// Shortest text that parses back to the same double.
std::string format(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format(bool v) { return v ? "true" : "false"; }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field number(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<T>(k, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename Get>
Field nested_number(Get get) {
  using T = std::remove_reference_t<decltype(get(std::declval<RunConfig&>()))>;
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_number<T>(k, v); },
          [get](const RunConfig& c) {
            auto& m = get(const_cast<RunConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) return format(m);
            else return std::to_string(m);
          }};
}

template <typename Get>
Field nested_bool(Get get) {
  return {[get](RunConfig& c, const std::string& k, const std::string& v) { get(c) = parse_bool(k, v); },
          [get](const RunConfig& c) { return format(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field nested_path(Get get) {
  return {[get](RunConfig& c, const std::string&, const std::string& v) { get(c) = v; },
          [get](const RunConfig& c) { return get(const_cast<RunConfig&>(c)).string(); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> f;
    f.emplace_back("seed", number(&RunConfig::seed));
    f.emplace_back("workers", number(&RunConfig::workers));
    f.emplace_back("classes", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                      if (v != "894" && v != "full" && v != "14" && v != "4") {
                                        throw ConfigError("config: " + k + " must be 894, 14 or 4");
                                      }
                                      c.classes = v == "full" ? "894" : v;
                                    },
                                    [](const RunConfig& c) { return c.classes; }});
    f.emplace_back("channels", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                       std::array<std::size_t, 4> ch{};
                                       std::stringstream in(v);
                                       std::string item;
                                       std::size_t n = 0;
                                       while (std::getline(in, item, ',')) {
                                         if (n == ch.size()) throw ConfigError("config: " + k + " needs 4 values");
                                         ch[n++] = parse_number<std::size_t>(k, trim(item));
                                       }
                                       if (n != ch.size()) throw ConfigError("config: " + k + " needs 4 values");
                                       c.network.channels = ch;
                                     },
                                     [](const RunConfig& c) {
                                       const auto& ch = c.network.channels;
                                       return std::to_string(ch[0]) + "," + std::to_string(ch[1]) + "," +
                                              std::to_string(ch[2]) + "," + std::to_string(ch[3]);
                                     }});
    f.emplace_back("use_depth", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                        c.network.channels[0] = parse_bool(k, v) ? 4 : 3;
                                      },
                                      [](const RunConfig& c) { return format(c.network.channels[0] == 4); }});
    f.emplace_back("kernel", nested_number([](RunConfig& c) -> auto& { return c.network.kernel; }));
    f.emplace_back("frame_height", nested_number([](RunConfig& c) -> auto& { return c.network.height; }));
    f.emplace_back("frame_width", nested_number([](RunConfig& c) -> auto& { return c.network.width; }));
    f.emplace_back("hidden_units", number(&RunConfig::hidden_units));
    f.emplace_back("lcn_window", number(&RunConfig::lcn_window));
    f.emplace_back("lcn_epsilon", number(&RunConfig::lcn_epsilon));
    f.emplace_back("epochs", nested_number([](RunConfig& c) -> auto& { return c.train.epochs; }));
    f.emplace_back("learning_rate", nested_number([](RunConfig& c) -> auto& { return c.train.learning_rate; }));
    f.emplace_back("batch_pixels", nested_number([](RunConfig& c) -> auto& { return c.train.batch_pixels; }));
    f.emplace_back("update_extractor", nested_bool([](RunConfig& c) -> auto& { return c.train.update_extractor; }));
    f.emplace_back("checkpoint_every", number(&RunConfig::checkpoint_every));
    f.emplace_back("target_accuracy", number(&RunConfig::target_accuracy));
    f.emplace_back("superpixels", nested_bool([](RunConfig& c) -> auto& { return c.superpixels; }));
    f.emplace_back("sp_k", nested_number([](RunConfig& c) -> auto& { return c.superpixel.k; }));
    f.emplace_back("sp_sigma", nested_number([](RunConfig& c) -> auto& { return c.superpixel.sigma; }));
    f.emplace_back("sp_min_size", nested_number([](RunConfig& c) -> auto& { return c.superpixel.min_size; }));
    f.emplace_back("temporal", nested_bool([](RunConfig& c) -> auto& { return c.temporal; }));
    f.emplace_back("temporal_alpha", nested_number([](RunConfig& c) -> auto& { return c.temporal_config.alpha; }));
    f.emplace_back("temporal_min_overlap",
                   nested_number([](RunConfig& c) -> auto& { return c.temporal_config.min_overlap; }));
    f.emplace_back("class_table", nested_path([](RunConfig& c) -> auto& { return c.class_table; }));
    f.emplace_back("clusters14", nested_path([](RunConfig& c) -> auto& { return c.clusters14; }));
    f.emplace_back("clusters4", nested_path([](RunConfig& c) -> auto& { return c.clusters4; }));
    f.emplace_back("palette", nested_path([](RunConfig& c) -> auto& { return c.palette; }));
    f.emplace_back("synth_layout", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                           if (v == "room") c.synth.layout = SynthLayout::room;
                                           else if (v == "patches") c.synth.layout = SynthLayout::patches;
                                           else throw ConfigError("config: " + k + " must be room or patches");
                                         },
                                         [](const RunConfig& c) {
                                           return std::string(c.synth.layout == SynthLayout::room ? "room" : "patches");
                                         }});
    f.emplace_back("synth_floor_fraction", nested_number([](RunConfig& c) -> auto& { return c.synth.floor_fraction; }));
    f.emplace_back("synth_ceiling_fraction", nested_number([](RunConfig& c) -> auto& { return c.synth.ceiling_fraction; }));
    f.emplace_back("synth_jitter", nested_number([](RunConfig& c) -> auto& { return c.synth.jitter; }));
    f.emplace_back("synth_min_objects", nested_number([](RunConfig& c) -> auto& { return c.synth.min_objects; }));
    f.emplace_back("synth_max_objects", nested_number([](RunConfig& c) -> auto& { return c.synth.max_objects; }));
    f.emplace_back("synth_color_noise", nested_number([](RunConfig& c) -> auto& { return c.synth.color_noise; }));
    f.emplace_back("synth_depth_noise", nested_number([](RunConfig& c) -> auto& { return c.synth.depth_noise; }));
    f.emplace_back("synth_train", number(&RunConfig::synth_train));
    f.emplace_back("synth_test", number(&RunConfig::synth_test));
    return f;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, field] : fields()) out.emplace_back(name, field.get(*this));
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::validate() const {
  network.validate();
  train.validate();
  superpixel.validate();
  temporal_config.validate();
  synth.validate();
  if (workers == 0) throw ConfigError("config: workers must be positive");
  if (hidden_units == 0) throw ConfigError("config: hidden_units must be positive");
  if (lcn_window % 2 == 0) throw ConfigError("config: lcn_window must be odd");
  if (!(lcn_epsilon > 0.0)) throw ConfigError("config: lcn_epsilon must be positive");
  if (checkpoint_every == 0) throw ConfigError("config: checkpoint_every must be positive");
  if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0)) {
    throw ConfigError("config: target_accuracy must lie in [0, 1]");
  }
}

RunConfig RunConfig::parse(std::istream& in, const std::string& origin) {
  RunConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in, path.string());
}

}  // namespace rgbdseg
