#pragma once

// Binary tensor container used for every array artifact on disk.
//
// Layout (all integers little-endian):
//   "COTT"            4 bytes magic
//   version  u8       always 1
//   dtype    u8       0 = float32, 1 = uint8
//   ndim     u8
//   dims     ndim x u32
//   payload  row-major values

#include "cotmap/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace cotmap {

enum class DType : std::uint8_t { F32 = 0, U8 = 1 };

struct Tensor {
  DType dtype = DType::F32;
  std::vector<std::uint32_t> dims;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;

  std::size_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

class TensorFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

Tensor to_tensor(const ImageF& img);
Tensor to_tensor(const ImageU8& img);
/// Accepts 2-D (H x W) or 3-D (C x H x W) tensors.
ImageF image_f32(const Tensor& t);
ImageU8 image_u8(const Tensor& t);

}  // namespace cotmap
