#include "rgbdseg/container.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace rgbdseg {

namespace {

constexpr std::array<char, 4> kMagic = {'R', 'G', 'D', 'T'};
constexpr std::uint32_t kMaxRank = 16;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DataError(std::string("container: truncated while reading ") + what);
  }
  return to_little(v);
}

std::size_t dtype_bytes(DType dtype) {
  switch (dtype) {
    case DType::f64: return 8;
    case DType::f32: return 4;
    case DType::u16: return 2;
    case DType::u8: return 1;
  }
  throw DataError("container: unknown dtype");
}

template <typename Int>
Int checked_integer(double v) {
  if (!(v >= 0.0 && v <= static_cast<double>(std::numeric_limits<Int>::max())) ||
      v != std::floor(v)) {
    throw DataError("container: value " + std::to_string(v) + " not representable as " +
                    (sizeof(Int) == 1 ? "u8" : "u16"));
  }
  return static_cast<Int>(v);
}

}  // namespace

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::f64: return "f64";
    case DType::f32: return "f32";
    case DType::u16: return "u16";
    case DType::u8: return "u8";
  }
  return "?";
}

void write_container(std::ostream& out, const Tensor& tensor, DType dtype) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t extent : tensor.shape()) put<std::uint64_t>(out, extent);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));

  const std::size_t width = dtype_bytes(dtype);
  std::vector<char> payload(tensor.size() * width);
  char* dst = payload.data();
  for (double v : tensor.values()) {
    switch (dtype) {
      case DType::f64: {
        if (!std::isfinite(v)) throw DataError("container: non-finite value");
        const double le = to_little(v);
        std::memcpy(dst, &le, 8);
        break;
      }
      case DType::f32: {
        const auto f = static_cast<float>(v);
        if (!std::isfinite(f)) throw DataError("container: value not finite in f32");
        const float le = to_little(f);
        std::memcpy(dst, &le, 4);
        break;
      }
      case DType::u16: {
        const std::uint16_t le = to_little(checked_integer<std::uint16_t>(v));
        std::memcpy(dst, &le, 2);
        break;
      }
      case DType::u8: *dst = static_cast<char>(checked_integer<std::uint8_t>(v)); break;
    }
    dst += width;
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("container: write failed");
}

Container read_container(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError("container: bad magic (expected RGDT)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kContainerVersion) {
    throw DataError("container: unsupported version " + std::to_string(version));
  }
  const auto rank = get<std::uint32_t>(in, "rank");
  if (rank > kMaxRank) throw DataError("container: rank " + std::to_string(rank) + " too large");
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& extent : shape) {
    const auto e = get<std::uint64_t>(in, "extent");
    if (e != 0 && count > std::numeric_limits<std::uint32_t>::max() / e) {
      throw DataError("container: extents too large");
    }
    extent = static_cast<std::size_t>(e);
    count *= extent;
  }
  const auto code = get<std::uint8_t>(in, "dtype");
  if (code < 1 || code > 4) throw DataError("container: unknown dtype " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t width = dtype_bytes(dtype);

  std::vector<char> payload(count * width);
  if (!in.read(payload.data(), static_cast<std::streamsize>(payload.size()))) {
    throw DataError("container: truncated payload");
  }
  std::vector<double> values(count);
  const char* src = payload.data();
  for (double& v : values) {
    switch (dtype) {
      case DType::f64: {
        double x;
        std::memcpy(&x, src, 8);
        v = to_little(x);
        break;
      }
      case DType::f32: {
        float x;
        std::memcpy(&x, src, 4);
        v = static_cast<double>(to_little(x));
        break;
      }
      case DType::u16: {
        std::uint16_t x;
        std::memcpy(&x, src, 2);
        v = static_cast<double>(to_little(x));
        break;
      }
      case DType::u8: v = static_cast<double>(static_cast<unsigned char>(*src)); break;
    }
    src += width;
  }
  Container c{dtype, Tensor(std::move(shape), std::move(values))};
  c.tensor.require_finite("container payload");
  return c;
}

void save_container(const std::filesystem::path& path, const Tensor& tensor, DType dtype) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_container(out, tensor, dtype);
}

Container load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_container(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const NumericError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void Checkpoint::put(std::string name, Tensor tensor, DType dtype) {
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw DataError("checkpoint: name too long");
  }
  for (auto& [n, c] : entries_) {
    if (n == name) {
      c = Container{dtype, std::move(tensor)};
      return;
    }
  }
  entries_.emplace_back(std::move(name), Container{dtype, std::move(tensor)});
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, c] : entries_) {
    if (n == name) return c.tensor;
  }
  throw DataError("checkpoint: missing entry '" + name + "'");
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& [name, c] : entries_) {
    const auto len = to_little(static_cast<std::uint16_t>(name.size()));
    out.write(reinterpret_cast<const char*>(&len), 2);
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_container(out, c.tensor, c.dtype);
  }
  if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Checkpoint ckpt;
  try {
    while (in.peek() != std::char_traits<char>::eof()) {
      const auto len = rgbdseg::get<std::uint16_t>(in, "name length");
      std::string name(len, '\0');
      if (!in.read(name.data(), len)) throw DataError("checkpoint: truncated name");
      Container c = read_container(in);
      ckpt.entries_.emplace_back(std::move(name), std::move(c));
    }
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace rgbdseg
