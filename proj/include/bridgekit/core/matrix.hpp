// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "bridgekit/core/errors.hpp"

namespace bridgekit {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

// Dense row-major matrix of doubles. Batches of points are stored one point per row.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape_{rows, cols}, data_(rows * cols, fill) {}
  explicit Matrix(Shape s, double fill = 0.0) : Matrix(s.rows, s.cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    shape_.rows = rows.size();
    shape_.cols = rows.size() ? rows.begin()->size() : 0;
    data_.reserve(shape_.size());
    for (const auto& r : rows) {
      detail::require(r.size() == shape_.cols, "Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix column(std::span<const double> v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
  }
  static Matrix row_vector(std::span<const double> v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const noexcept { return shape_.rows; }
  std::size_t cols() const noexcept { return shape_.cols; }
  std::size_t size() const noexcept { return data_.size(); }
  const Shape& shape() const noexcept { return shape_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * shape_.cols, shape_.cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * shape_.cols, shape_.cols};
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const Matrix&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Copies the selected rows of `m` into a new matrix.
inline Matrix take_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = m.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

inline Matrix hconcat(std::span<const Matrix> parts) {
  detail::require(!parts.empty(), "hconcat: no parts");
  const std::size_t n = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == n, "hconcat: row count mismatch");
    cols += p.cols();
  }
  Matrix out(n, cols);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      auto src = p.row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + off);
      off += p.cols();
    }
  }
  return out;
}

inline std::vector<double> column_mean(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += m(r, c);
  for (auto& v : mean) v /= static_cast<double>(m.rows());
  return mean;
}

// Population (divide-by-n) standard deviation per column.
inline std::vector<double> column_std(const Matrix& m) {
  const auto mean = column_mean(m);
  std::vector<double> var(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double d = m(r, c) - mean[c];
      var[c] += d * d;
    }
  for (auto& v : var) v = std::sqrt(v / static_cast<double>(m.rows()));
  return var;
}

}  // namespace bridgekit
