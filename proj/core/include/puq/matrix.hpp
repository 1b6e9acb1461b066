#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace puq {

using Vector = std::vector<double>;
using ClassIndex = std::uint32_t;

/// Dense row-major matrix of 64-bit floats. Immutable by convention once
/// filled: operations return new values instead of mutating shared ones.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  /// Takes ownership of `data`, which must have length rows*cols.
  static Matrix from_data(std::size_t rows, std::size_t cols, Vector data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool all_finite() const;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

/// y = M x for a flat input vector of length M.cols().
Vector matvec(const Matrix& m, std::span<const double> x);

}  // namespace puq
