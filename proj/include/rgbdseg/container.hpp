#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rgbdseg/tensor.hpp"

namespace rgbdseg {

// On-disk layout of one container, all integers little-endian:
//   "RGDT" | u32 version (1) | u32 rank | u64 extents[rank] | u8 dtype | payload
// Payload is row-major in the stored dtype.
enum class DType : std::uint8_t { f64 = 1, f32 = 2, u16 = 3, u8 = 4 };

inline constexpr std::uint32_t kContainerVersion = 1;

const char* dtype_name(DType dtype);

struct Container {
  DType dtype = DType::f64;
  Tensor tensor;
};

/// Throws DataError if a value cannot be represented exactly in `dtype`
/// (integers out of range or fractional, non-finite floats).
void write_container(std::ostream& out, const Tensor& tensor, DType dtype);
Container read_container(std::istream& in);

void save_container(const std::filesystem::path& path, const Tensor& tensor, DType dtype);
Container load_container(const std::filesystem::path& path);

/// Ordered collection of named tensors. On disk: a sequence of
/// (u16 name length, UTF-8 name, container) records until end of file.
class Checkpoint {
 public:
  void put(std::string name, Tensor tensor, DType dtype = DType::f64);
  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  const std::vector<std::pair<std::string, Container>>& entries() const { return entries_; }

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, Container>> entries_;
};

}  // namespace rgbdseg
