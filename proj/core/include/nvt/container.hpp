#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nvt/tensor.hpp"

namespace nvt {

// "NVT1" named-tensor container shared by checkpoints and packed datasets.
//
//   magic "NVT1" | version u32 | count u32 |
//   count x { name_len u16, name utf-8, dtype u8, rank u8, extents u64[rank], data }
//
// All integers and element data are little-endian.
inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint8_t { F32 = 1, F64 = 2, U8 = 3, I64 = 4 };

std::size_t dtype_size(DType dtype);

struct PackedTensor {
  std::string name;
  DType dtype = DType::F64;
  std::vector<std::uint64_t> extents;
  std::vector<std::uint8_t> bytes;  // little-endian element data

  static PackedTensor from_tensor(std::string name, const Tensor& t, DType dtype = DType::F64);
  static PackedTensor from_u8(std::string name, std::vector<std::uint64_t> extents, std::span<const std::uint8_t> data);
  static PackedTensor from_i64(std::string name, std::vector<std::uint64_t> extents, std::span<const std::int64_t> data);
  static PackedTensor from_text(std::string name, const std::string& text);

  std::uint64_t element_count() const;
  // F32 and F64 entries widen to a float64 Tensor.
  Tensor to_tensor() const;
  std::vector<std::int64_t> to_i64() const;
  std::string to_text() const;

  bool operator==(const PackedTensor&) const = default;
};

std::vector<std::uint8_t> encode_packed(std::span<const PackedTensor> entries);
// Throws FormatError naming the byte offset of the first inconsistency. Never
// returns a partial result.
std::vector<PackedTensor> decode_packed(std::span<const std::uint8_t> bytes);

void save_packed(const std::filesystem::path& path, std::span<const PackedTensor> entries);
std::vector<PackedTensor> load_packed(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace nvt
