#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "oclb/tensor.hpp"

namespace oclb {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {0x4F, 0x43, 0x42, 0x54};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderFixed = 8;

template <class T>
void to_little_endian(const T& value, std::uint8_t* out) {
  std::memcpy(out, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(out, out + sizeof(T));
  }
}

template <class T>
T from_little_endian(const std::uint8_t* in) {
  std::array<std::uint8_t, sizeof(T)> bytes;
  std::memcpy(bytes.data(), in, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open tensor file " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool valid_dtype(std::uint8_t code) { return code >= 1 && code <= 4; }

TensorHeader parse_header(std::span<const std::uint8_t> bytes, const std::filesystem::path& path,
                          std::size_t& payload_offset) {
  if (bytes.size() < kHeaderFixed) {
    throw FormatError(path.string() + ": truncated header");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError(path.string() + ": bad magic");
  }
  if (bytes[4] != kVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(bytes[4]));
  }
  if (!valid_dtype(bytes[5])) {
    throw FormatError(path.string() + ": unknown dtype code " + std::to_string(bytes[5]));
  }
  if (bytes[7] != 0) {
    throw FormatError(path.string() + ": reserved byte is not zero");
  }
  TensorHeader header{static_cast<DType>(bytes[5]), Shape(bytes[6])};
  payload_offset = kHeaderFixed + 8 * header.shape.size();
  if (bytes.size() < payload_offset) {
    throw FormatError(path.string() + ": truncated dimensions");
  }
  for (std::size_t i = 0; i < header.shape.size(); ++i) {
    header.shape[i] = static_cast<std::size_t>(
        from_little_endian<std::uint64_t>(bytes.data() + kHeaderFixed + 8 * i));
  }
  return header;
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::F32: return 4;
    case DType::U8: return 1;
    case DType::I64: return 8;
    case DType::F64: return 8;
  }
  throw FormatError("unknown dtype");
}

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::F32: return "f32";
    case DType::U8: return "u8";
    case DType::I64: return "i64";
    case DType::F64: return "f64";
  }
  return "?";
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::vector<std::uint8_t> encode_tensor_bytes(DType dtype, const Shape& shape,
                                              std::span<const std::uint8_t> payload_le) {
  if (shape.size() > 255) {
    throw ShapeError("tensor rank exceeds 255");
  }
  if (payload_le.size() != shape_numel(shape) * dtype_size(dtype)) {
    throw ShapeError("payload size does not match shape " + shape_string(shape));
  }
  std::vector<std::uint8_t> out(kHeaderFixed + 8 * shape.size() + payload_le.size());
  std::copy(kMagic.begin(), kMagic.end(), out.begin());
  out[4] = kVersion;
  out[5] = static_cast<std::uint8_t>(dtype);
  out[6] = static_cast<std::uint8_t>(shape.size());
  out[7] = 0;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    to_little_endian<std::uint64_t>(shape[i], out.data() + kHeaderFixed + 8 * i);
  }
  std::copy(payload_le.begin(), payload_le.end(), out.begin() + kHeaderFixed + 8 * shape.size());
  return out;
}

template <class T>
void write_tensor(const std::filesystem::path& path, const Tensor<T>& tensor) {
  if (tensor.data.size() != shape_numel(tensor.shape)) {
    throw ShapeError("tensor payload does not match shape " + shape_string(tensor.shape));
  }
  std::vector<std::uint8_t> payload(tensor.data.size() * sizeof(T));
  for (std::size_t i = 0; i < tensor.data.size(); ++i) {
    to_little_endian<T>(tensor.data[i], payload.data() + i * sizeof(T));
  }
  const auto bytes = encode_tensor_bytes(dtype_of<T>::value, tensor.shape, payload);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write tensor file " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("short write to " + path.string());
  }
}

template <class T>
Tensor<T> read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  std::size_t offset = 0;
  auto header = parse_header(bytes, path, offset);
  if (header.dtype != dtype_of<T>::value) {
    throw FormatError(path.string() + ": expected dtype " + dtype_name(dtype_of<T>::value) +
                      ", found " + dtype_name(header.dtype));
  }
  const std::size_t count = shape_numel(header.shape);
  if (bytes.size() - offset != count * sizeof(T)) {
    throw FormatError(path.string() + ": payload size does not match shape " +
                      shape_string(header.shape));
  }
  std::vector<T> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = from_little_endian<T>(bytes.data() + offset + i * sizeof(T));
  }
  return Tensor<T>(std::move(header.shape), std::move(values));
}

TensorHeader read_tensor_header(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  std::size_t offset = 0;
  return parse_header(bytes, path, offset);
}

template void write_tensor<float>(const std::filesystem::path&, const Tensor<float>&);
template void write_tensor<double>(const std::filesystem::path&, const Tensor<double>&);
template void write_tensor<std::uint8_t>(const std::filesystem::path&, const Tensor<std::uint8_t>&);
template void write_tensor<std::int64_t>(const std::filesystem::path&, const Tensor<std::int64_t>&);
template Tensor<float> read_tensor<float>(const std::filesystem::path&);
template Tensor<double> read_tensor<double>(const std::filesystem::path&);
template Tensor<std::uint8_t> read_tensor<std::uint8_t>(const std::filesystem::path&);
template Tensor<std::int64_t> read_tensor<std::int64_t>(const std::filesystem::path&);

}  // namespace oclb
