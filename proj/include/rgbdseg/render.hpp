#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include "rgbdseg/label_map.hpp"

namespace rgbdseg {

using Color = std::array<std::uint8_t, 3>;

/// Class -> RGB colours. Text form: "class_id r g b" per line, '#' comments.
/// Classes without an entry get a generated colour; ignored pixels are black.
class Palette {
 public:
  Palette() = default;
  explicit Palette(std::map<std::int32_t, Color> colors) : colors_(std::move(colors)) {}

  static Palette parse(std::istream& in, const std::string& origin = "<stream>");
  static Palette load(const std::filesystem::path& path);
  void write(std::ostream& out) const;

  Color color(std::int32_t label) const;
  const std::map<std::int32_t, Color>& colors() const { return colors_; }

 private:
  std::map<std::int32_t, Color> colors_;
};

/// Row-major interleaved RGB bytes.
std::vector<std::uint8_t> render_labels(const LabelMap& labels, const Palette& palette);

/// 8-bit RGB PNG from interleaved bytes.
void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb,
               std::size_t height, std::size_t width);

/// Reads an 8-bit RGB or RGBA PNG back as interleaved RGB bytes.
std::vector<std::uint8_t> read_png(const std::filesystem::path& path, std::size_t& height,
                                   std::size_t& width);

}  // namespace rgbdseg
