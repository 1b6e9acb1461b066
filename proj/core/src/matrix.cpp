#include "puq/matrix.hpp"

#include <cmath>

#include "puq/errors.hpp"

namespace puq {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_data(std::size_t rows, std::size_t cols, Vector data) {
  if (data.size() != rows * cols) {
    throw InvalidInput("Matrix::from_data: data length " + std::to_string(data.size()) +
                       " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.data_ = std::move(data);
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) {
    throw InvalidInput("matvec: expected input of length " + std::to_string(m.cols()) +
                       ", got " + std::to_string(x.size()));
  }
  Vector y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

}  // namespace puq
