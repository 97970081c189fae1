#pragma once

// Binary interchange format for feature tensors. Layout, all little-endian:
//
//   bytes 0..3    magic "BVQF"
//   u32           format version (1)
//   u32           dtype code (0 = float32)
//   u32           ndim
//   u64 x ndim    dims
//   f32 x prod    row-major payload

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bvqa/tensor.hpp"

namespace bvqa {

inline constexpr char kTensorFileMagic[4] = {'B', 'V', 'Q', 'F'};
inline constexpr std::uint32_t kTensorFileVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 0;
inline constexpr const char* kTensorFileExtension = ".bvqf";

struct RawTensor {
  Shape dims;
  std::vector<float> values;

  bool operator==(const RawTensor&) const = default;
};

std::vector<std::uint8_t> encode_tensor(const RawTensor& tensor);
// Throws DataError on malformed input; `origin` names the source in messages.
RawTensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

void write_tensor_file(const std::filesystem::path& path, const RawTensor& tensor);
RawTensor read_tensor_file(const std::filesystem::path& path);

// Float32 payload promoted to double.
Tensor to_tensor(const RawTensor& raw);
// Narrowed to float32.
RawTensor to_raw(const Tensor& tensor);

}  // namespace bvqa
