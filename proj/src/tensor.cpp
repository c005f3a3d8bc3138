#include "mign/tensor.hpp"

#include "mign/errors.hpp"

namespace mign {

void matmul_ab(const Matrix& a, const Matrix& b, Matrix& out, Exec ex) {
  if (a.cols() != b.rows()) throw ShapeError("matmul_ab: inner dimensions differ");
  out = Matrix(a.rows(), b.cols());
  const std::size_t k = a.cols(), m = b.cols();
  parallel_for(a.rows(), ex, [&](std::size_t i) {
    const double* ar = a.row(i);
    double* or_ = out.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b.row(p);
      for (std::size_t j = 0; j < m; ++j) or_[j] += av * br[j];
    }
  });
}

void matmul_abt(const Matrix& a, const Matrix& b, Matrix& out, Exec ex) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_abt: inner dimensions differ");
  out = Matrix(a.rows(), b.rows());
  const std::size_t k = a.cols(), m = b.rows();
  parallel_for(a.rows(), ex, [&](std::size_t i) {
    const double* ar = a.row(i);
    double* or_ = out.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double* br = b.row(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      or_[j] = acc;
    }
  });
}

void matmul_atb_accum(const Matrix& a, const Matrix& b, Matrix& out, Exec ex) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_atb: row counts differ");
  if (out.rows() != a.cols() || out.cols() != b.cols())
    throw ShapeError("matmul_atb: output shape mismatch");
  const std::size_t n = a.rows(), m = b.cols();
  parallel_for(a.cols(), ex, [&](std::size_t c) {
    double* or_ = out.row(c);
    for (std::size_t r = 0; r < n; ++r) {
      const double av = a(r, c);
      const double* br = b.row(r);
      for (std::size_t j = 0; j < m; ++j) or_[j] += av * br[j];
    }
  });
}

void colsum_accum(const Matrix& a, std::span<double> out, Exec ex) {
  if (out.size() != a.cols()) throw ShapeError("colsum: output size mismatch");
  const std::size_t n = a.rows();
  parallel_for(a.cols(), ex, [&](std::size_t c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) acc += a(r, c);
    out[c] += acc;
  });
}

void add_bias_rows(Matrix& a, std::span<const double> bias, Exec ex) {
  if (bias.size() != a.cols()) throw ShapeError("add_bias_rows: bias size mismatch");
  parallel_for(a.rows(), ex, [&](std::size_t r) {
    double* ar = a.row(r);
    for (std::size_t c = 0; c < bias.size(); ++c) ar[c] += bias[c];
  });
}

}  // namespace mign
