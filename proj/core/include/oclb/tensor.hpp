#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "oclb/errors.hpp"

namespace oclb {

enum class DType : std::uint8_t { F32 = 1, U8 = 2, I64 = 3, F64 = 4 };

template <class T> struct dtype_of;
template <> struct dtype_of<float> { static constexpr DType value = DType::F32; };
template <> struct dtype_of<std::uint8_t> { static constexpr DType value = DType::U8; };
template <> struct dtype_of<std::int64_t> { static constexpr DType value = DType::I64; };
template <> struct dtype_of<double> { static constexpr DType value = DType::F64; };

std::size_t dtype_size(DType dtype);
const char* dtype_name(DType dtype);

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major tensor with owned storage.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{}) : shape(std::move(s)), data(shape_numel(shape), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_numel(shape)) {
      throw ShapeError("tensor payload of " + std::to_string(data.size()) +
                       " elements does not match shape " + shape_string(shape));
    }
  }

  std::size_t ndim() const { return shape.size(); }
  std::size_t numel() const { return data.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  /// Elements per index along the leading axis.
  std::size_t stride0() const { return shape.empty() || shape[0] == 0 ? 0 : numel() / shape[0]; }

  std::span<T> slice(std::size_t i) { return {data.data() + i * stride0(), stride0()}; }
  std::span<const T> slice(std::size_t i) const { return {data.data() + i * stride0(), stride0()}; }

  bool operator==(const Tensor&) const = default;
};

/// OCBT tensor file: "OCBT", version 1, dtype, ndim, reserved 0, u64 dims, payload (little-endian).
template <class T>
void write_tensor(const std::filesystem::path& path, const Tensor<T>& tensor);

template <class T>
Tensor<T> read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_tensor_bytes(DType dtype, const Shape& shape,
                                              std::span<const std::uint8_t> payload_le);

/// Reads only the header; used to probe dtype before choosing a typed reader.
struct TensorHeader {
  DType dtype;
  Shape shape;
};
TensorHeader read_tensor_header(const std::filesystem::path& path);

}  // namespace oclb
