#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossgr {

// Dense row-major matrix of doubles. The latent dimensions in this toolkit
// are tiny (d = 8 by default), so plain loops are both fast enough and
// reproducible; there is deliberately no BLAS behind this type.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major, rows * cols entries

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  static Matrix row_vector(std::vector<double> v) {
    Matrix m;
    m.rows = 1;
    m.cols = static_cast<int>(v.size());
    m.values = std::move(v);
    return m;
  }

  static Matrix column_vector(std::vector<double> v) {
    Matrix m;
    m.rows = static_cast<int>(v.size());
    m.cols = 1;
    m.values = std::move(v);
    return m;
  }

  static Matrix from_rows(std::vector<std::vector<double>> data) {
    Matrix m(static_cast<int>(data.size()),
             data.empty() ? 0 : static_cast<int>(data[0].size()));
    for (int r = 0; r < m.rows; ++r) {
      if (static_cast<int>(data[r].size()) != m.cols)
        throw std::invalid_argument("Matrix::from_rows: ragged rows");
      for (int c = 0; c < m.cols; ++c) m.at(r, c) = data[r][c];
    }
    return m;
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  double& at(int r, int c) {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  double at(int r, int c) const {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return values[static_cast<std::size_t>(r) * cols + c];
  }

  double* row(int r) { return values.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const {
    return values.data() + static_cast<std::size_t>(r) * cols;
  }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { values.assign(values.size(), v); }
};

inline Matrix zeros_like(const Matrix& m) { return Matrix(m.rows, m.cols); }

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

// Finiteness is an invariant of every kernel output; the check only runs in
// debug builds.
inline void debug_check_finite(const Matrix& m, const char* where) {
#ifndef NDEBUG
  for (double v : m.values) {
    (void)v;
    assert(std::isfinite(v) && where != nullptr);
  }
#else
  (void)m;
  (void)where;
#endif
}

}  // namespace crossgr
