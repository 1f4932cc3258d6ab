#pragma once

// Dense double-precision kernels used by the power-flow, sensitivity and QP
// inner loops. Every kernel has a scalar reference implementation and an
// AVX2/FMA variant; the variant is chosen once at first use from the CPU
// feature bits. Setting FLEX_SIMD=scalar in the environment forces the
// scalar table.
//
// Matrices are row-major with an explicit leading dimension `lda`, so a
// column sub-block can be addressed by offsetting the base pointer.

#include <cstddef>
#include <span>
#include <string_view>

namespace flex::simd {

struct KernelTable {
  std::string_view name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // y = A x, A is rows x cols
  void (*gemv)(const double* a, std::size_t lda, std::size_t rows, std::size_t cols,
               const double* x, double* y);

  // y = A^T x, A is rows x cols, y has cols entries
  void (*gemv_t)(const double* a, std::size_t lda, std::size_t rows, std::size_t cols,
                 const double* x, double* y);

  // Complex y = A x with split real/imaginary storage.
  void (*cgemv)(const double* a_re, const double* a_im, std::size_t lda, std::size_t rows,
                std::size_t cols, const double* x_re, const double* x_im, double* y_re,
                double* y_im);

  // max_i |x[i]|
  double (*max_abs)(const double* x, std::size_t n);
};

const KernelTable& scalar_kernels();

// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// Table selected for this process.
const KernelTable& kernels();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline double max_abs(std::span<const double> x) { return kernels().max_abs(x.data(), x.size()); }

}  // namespace flex::simd
