#include <algorithm>
#include <cmath>

#include "flex/simd/kernels.hpp"

namespace flex::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t lda, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * lda, x, cols);
}

void gemv_t_scalar(const double* a, std::size_t lda, std::size_t rows, std::size_t cols,
                   const double* x, double* y) {
  std::fill(y, y + cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], a + r * lda, y, cols);
}

void cgemv_scalar(const double* a_re, const double* a_im, std::size_t lda, std::size_t rows,
                  std::size_t cols, const double* x_re, const double* x_im, double* y_re,
                  double* y_im) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a_re + r * lda;
    const double* ai = a_im + r * lda;
    double re = 0.0;
    double im = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      re += ar[c] * x_re[c] - ai[c] * x_im[c];
      im += ar[c] * x_im[c] + ai[c] * x_re[c];
    }
    y_re[r] = re;
    y_im[r] = im;
  }
}

double max_abs_scalar(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar",     dot_scalar,   axpy_scalar,   gemv_scalar,
                                 gemv_t_scalar, cgemv_scalar, max_abs_scalar};
  return table;
}

}  // namespace flex::simd
