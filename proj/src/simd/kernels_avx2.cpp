// Compiled with -mavx2 -mfma when the toolchain targets x86-64; only ever
// called after a runtime CPU check.

#include "flex/simd/kernels.hpp"

#if defined(FLEX_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace flex::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* a, std::size_t lda, std::size_t rows, std::size_t cols,
               const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(a + r * lda, x, cols);
}

void gemv_t_avx2(const double* a, std::size_t lda, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  std::fill(y, y + cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(x[r], a + r * lda, y, cols);
}

void cgemv_avx2(const double* a_re, const double* a_im, std::size_t lda, std::size_t rows,
                std::size_t cols, const double* x_re, const double* x_im, double* y_re,
                double* y_im) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a_re + r * lda;
    const double* ai = a_im + r * lda;
    __m256d re = _mm256_setzero_pd();
    __m256d im = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vr = _mm256_loadu_pd(ar + c);
      const __m256d vi = _mm256_loadu_pd(ai + c);
      const __m256d xr = _mm256_loadu_pd(x_re + c);
      const __m256d xi = _mm256_loadu_pd(x_im + c);
      re = _mm256_fmadd_pd(vr, xr, re);
      re = _mm256_fnmadd_pd(vi, xi, re);
      im = _mm256_fmadd_pd(vr, xi, im);
      im = _mm256_fmadd_pd(vi, xr, im);
    }
    double sre = hsum(re);
    double sim = hsum(im);
    for (; c < cols; ++c) {
      sre += ar[c] * x_re[c] - ai[c] * x_im[c];
      sim += ar[c] * x_im[c] + ai[c] * x_re[c];
    }
    y_re[r] = sre;
    y_im[r] = sim;
  }
}

double max_abs_avx2(const double* x, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i)));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  double out = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  for (; i < n; ++i) out = std::max(out, std::abs(x[i]));
  return out;
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  static const KernelTable table{"avx2",     dot_avx2,   axpy_avx2,   gemv_avx2,
                                 gemv_t_avx2, cgemv_avx2, max_abs_avx2};
  return supported ? &table : nullptr;
}

}  // namespace flex::simd

#else

namespace flex::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace flex::simd

#endif
