// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "splitnn/error.hpp"

namespace splitnn {

using Shape = std::vector<std::uint32_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense n-dimensional float32 array, flat row-major storage.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_numel(shape))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) {
    std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<float>(n, 0.0f));
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::uint32_t dim(std::size_t i) const { return shape[i]; }

  // 2-d accessors for the common [rows, cols] case.
  float& at2(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  float at2(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Every nn op checks its outputs; context names the producing layer.
inline void check_finite(const Tensor& t, const std::string& context) {
  for (float v : t.data)
    if (!std::isfinite(v))
      throw NumericError("non-finite value produced by " + context);
}

}  // namespace splitnn
