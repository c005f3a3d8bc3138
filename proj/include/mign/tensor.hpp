#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mign/parallel.hpp"

namespace mign {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a * b, a: n x k, b: k x m. Rows of `out` are independent, so the
// OpenMP path parallelizes over them and matches the serial path bitwise.
void matmul_ab(const Matrix& a, const Matrix& b, Matrix& out, Exec ex = default_exec());

// out = a * b^T, a: n x k, b: m x k.
void matmul_abt(const Matrix& a, const Matrix& b, Matrix& out, Exec ex = default_exec());

// out += a^T * b, a: n x k, b: n x m -> out: k x m. Row index of `out` owns
// its accumulation loop, keeping the reduction order fixed.
void matmul_atb_accum(const Matrix& a, const Matrix& b, Matrix& out, Exec ex = default_exec());

// out[c] += sum over rows of a(:, c).
void colsum_accum(const Matrix& a, std::span<double> out, Exec ex = default_exec());

// Adds bias to every row.
void add_bias_rows(Matrix& a, std::span<const double> bias, Exec ex = default_exec());

}  // namespace mign
