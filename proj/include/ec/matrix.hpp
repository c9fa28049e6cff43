#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ec {

/// Row-major dense matrix.
template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<T> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const T> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  std::size_t size() const noexcept { return data.size(); }
  bool same_shape(std::size_t r, std::size_t c) const noexcept { return rows == r && cols == c; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

}  // namespace ec
