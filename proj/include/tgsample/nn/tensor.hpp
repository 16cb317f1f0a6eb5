#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tgsample/error.hpp"

namespace tgsample::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major float64 array. Operations in this library view every
/// tensor as a matrix: rank-1 tensors are a single row.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0) : Tensor(Shape{rows, cols}, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values) : shape{rows, cols}, data(std::move(values)) {
    require(data.size() == rows * cols, ErrorCode::ShapeMismatch,
            "tensor data has " + std::to_string(data.size()) + " values for shape " + shape_string(shape));
  }

  static Tensor row(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(1, n, std::move(values));
  }
  static Tensor column(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(n, 1, std::move(values));
  }
  static Tensor scalar(double v) { return Tensor(1, 1, std::vector<double>{v}); }

  [[nodiscard]] std::size_t rows() const { return shape.size() >= 2 ? numel(Shape(shape.begin(), shape.end() - 1)) : 1; }
  [[nodiscard]] std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  [[nodiscard]] std::size_t size() const { return data.size(); }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  [[nodiscard]] std::span<const double> row_span(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols(), cols());
  }

  [[nodiscard]] double item() const {
    require(data.size() == 1, ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape_string(shape));
    return data[0];
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  [[nodiscard]] bool all_finite() const {
    for (const double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

}  // namespace tgsample::nn
