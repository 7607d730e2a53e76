#include "rgbdseg/render.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <png.h>

#include "rgbdseg/tensor.hpp"

namespace rgbdseg {

namespace {

// Evenly spread hues (golden-ratio steps) at fixed saturation and value.
Color generated_color(std::int32_t label) {
  const double hue = std::fmod(0.1 + 0.618033988749895 * static_cast<double>(label), 1.0) * 6.0;
  const double s = 0.65, v = 0.9;
  const double c = v * s, x = c * (1.0 - std::fabs(std::fmod(hue, 2.0) - 1.0)), m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  auto byte = [m](double u) { return static_cast<std::uint8_t>(std::lround((u + m) * 255.0)); };
  return {byte(r), byte(g), byte(b)};
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

Palette Palette::parse(std::istream& in, const std::string& origin) {
  std::map<std::int32_t, Color> colors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    long id, r, g, b;
    if (!(fields >> id)) continue;
    std::string rest;
    if (!(fields >> r >> g >> b) || (fields >> rest) || id < 0 || r < 0 || r > 255 || g < 0 ||
        g > 255 || b < 0 || b > 255) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": expected 'class_id r g b'");
    }
    colors[static_cast<std::int32_t>(id)] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                                             static_cast<std::uint8_t>(b)};
  }
  return Palette(std::move(colors));
}

Palette Palette::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open palette " + path.string());
  return parse(in, path.string());
}

void Palette::write(std::ostream& out) const {
  out << "# class_id r g b\n";
  for (const auto& [id, c] : colors_) {
    out << id << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2]) << '\n';
  }
}

Color Palette::color(std::int32_t label) const {
  if (label == kIgnoreLabel) return {0, 0, 0};
  if (auto it = colors_.find(label); it != colors_.end()) return it->second;
  return generated_color(label);
}

std::vector<std::uint8_t> render_labels(const LabelMap& labels, const Palette& palette) {
  std::vector<std::uint8_t> out(labels.size() * 3);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Color c = palette.color(labels.labels[i]);
    std::copy(c.begin(), c.end(), out.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return out;
}

void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb,
               std::size_t height, std::size_t width) {
  if (rgb.size() != height * width * 3 || height == 0 || width == 0) {
    throw ShapeError("write_png: buffer does not hold " + std::to_string(height) + "x" +
                     std::to_string(width) + " RGB pixels");
  }
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("write_png: libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("write_png: encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + y * width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_png(const std::filesystem::path& path, std::size_t& height,
                                   std::size_t& width) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> out(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  height = image.height;
  width = image.width;
  return out;
}

}  // namespace rgbdseg
