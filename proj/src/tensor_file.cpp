#include "bvqa/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bvqa/errors.hpp"

namespace bvqa {

namespace {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

constexpr std::size_t kFixedHeader = 4 + 4 + 4 + 4;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const RawTensor& tensor) {
  if (shape_numel(tensor.dims) != tensor.values.size()) {
    throw std::invalid_argument("encode_tensor: dims " + shape_str(tensor.dims) + " do not match " +
                                std::to_string(tensor.values.size()) + " values");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeader + 8 * tensor.dims.size() + 4 * tensor.values.size());
  out.insert(out.end(), std::begin(kTensorFileMagic), std::end(kTensorFileMagic));
  put<std::uint32_t>(out, kTensorFileVersion);
  put<std::uint32_t>(out, kDtypeFloat32);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (std::size_t d : tensor.dims) put<std::uint64_t>(out, d);
  const auto* payload = reinterpret_cast<const std::uint8_t*>(tensor.values.data());
  out.insert(out.end(), payload, payload + 4 * tensor.values.size());
  return out;
}

RawTensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < kFixedHeader) throw DataError(origin + ": truncated header");
  if (std::memcmp(bytes.data(), kTensorFileMagic, 4) != 0) throw DataError(origin + ": bad magic");
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kTensorFileVersion) throw DataError(origin + ": unsupported version " + std::to_string(version));
  const auto dtype = get<std::uint32_t>(bytes, 8);
  if (dtype != kDtypeFloat32) throw DataError(origin + ": unsupported dtype code " + std::to_string(dtype));
  const auto ndim = get<std::uint32_t>(bytes, 12);
  const std::size_t header = kFixedHeader + 8 * static_cast<std::size_t>(ndim);
  if (bytes.size() < header) throw DataError(origin + ": truncated dims");

  RawTensor out;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const auto d = get<std::uint64_t>(bytes, kFixedHeader + 8 * i);
    out.dims.push_back(static_cast<std::size_t>(d));
    if (d != 0 && count > bytes.size() / d) throw DataError(origin + ": dims exceed payload size");
    count *= static_cast<std::size_t>(d);
  }
  const std::size_t expected = 4 * count;
  const std::size_t actual = bytes.size() - header;
  if (actual != expected) {
    throw DataError(origin + ": payload has " + std::to_string(actual) + " bytes, expected " +
                    std::to_string(expected));
  }
  out.values.resize(count);
  std::memcpy(out.values.data(), bytes.data() + header, expected);
  return out;
}

void write_tensor_file(const std::filesystem::path& path, const RawTensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing " + path.string());
}

RawTensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes, path.string());
}

Tensor to_tensor(const RawTensor& raw) {
  std::vector<double> values(raw.values.begin(), raw.values.end());
  return Tensor::from(raw.dims, std::move(values));
}

RawTensor to_raw(const Tensor& tensor) {
  RawTensor out;
  out.dims = tensor.shape();
  out.values.reserve(tensor.numel());
  for (double v : tensor.data()) out.values.push_back(static_cast<float>(v));
  return out;
}

}  // namespace bvqa
