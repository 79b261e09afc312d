// Compiled with -mavx2 only; nothing here may run before avx2_table() has
// confirmed CPU support.
#include <immintrin.h>

#include "kernels_impl.hpp"

namespace svl::kernels {
namespace {

constexpr std::size_t kF32Lanes = 8;
constexpr std::size_t kF64Lanes = 4;

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d high64 = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 2 * kF32Lanes <= n; i += 2 * kF32Lanes) {
    acc0 = _mm256_add_ps(acc0, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    acc1 = _mm256_add_ps(acc1, _mm256_mul_ps(_mm256_loadu_ps(a + i + kF32Lanes),
                                             _mm256_loadu_ps(b + i + kF32Lanes)));
  }
  for (; i + kF32Lanes <= n; i += kF32Lanes) {
    acc0 = _mm256_add_ps(acc0, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kF64Lanes <= n; i += 2 * kF64Lanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(a + i + kF64Lanes),
                                             _mm256_loadu_pd(b + i + kF64Lanes)));
  }
  for (; i + kF64Lanes <= n; i += kF64Lanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_f32(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + kF32Lanes <= n; i += kF32Lanes) {
    __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void axpy_f64(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kF64Lanes <= n; i += kF64Lanes) {
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void blend_f32(float w, const float* a, const float* b, float* out, std::size_t n) {
  const float wb = 1.0f - w;
  const __m256 vw = _mm256_set1_ps(w);
  const __m256 vwb = _mm256_set1_ps(wb);
  std::size_t i = 0;
  for (; i + kF32Lanes <= n; i += kF32Lanes) {
    __m256 pa = _mm256_mul_ps(vw, _mm256_loadu_ps(a + i));
    __m256 pb = _mm256_mul_ps(vwb, _mm256_loadu_ps(b + i));
    _mm256_storeu_ps(out + i, _mm256_add_ps(pa, pb));
  }
  for (; i < n; ++i) out[i] = w * a[i] + wb * b[i];
}

void blend_f64(double w, const double* a, const double* b, double* out, std::size_t n) {
  const double wb = 1.0 - w;
  const __m256d vw = _mm256_set1_pd(w);
  const __m256d vwb = _mm256_set1_pd(wb);
  std::size_t i = 0;
  for (; i + kF64Lanes <= n; i += kF64Lanes) {
    __m256d pa = _mm256_mul_pd(vw, _mm256_loadu_pd(a + i));
    __m256d pb = _mm256_mul_pd(vwb, _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(pa, pb));
  }
  for (; i < n; ++i) out[i] = w * a[i] + wb * b[i];
}

void scale_f32(float a, float* x, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + kF32Lanes <= n; i += kF32Lanes) {
    _mm256_storeu_ps(x + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), va));
  }
  for (; i < n; ++i) x[i] = x[i] * a;
}

void scale_f64(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kF64Lanes <= n; i += kF64Lanes) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  }
  for (; i < n; ++i) x[i] = x[i] * a;
}

// max_ps(x, 0) returns the second operand when x is -0 or equal, matching
// the scalar `x > 0 ? x : 0`.
void relu_f32(float* x, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + kF32Lanes <= n; i += kF32Lanes) {
    _mm256_storeu_ps(x + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  }
  for (; i < n; ++i) x[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_f64(double* x, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kF64Lanes <= n; i += kF64Lanes) {
    _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

float max_f32(const float* x, std::size_t n) {
  std::size_t i = 0;
  float m = x[0];
  if (n >= kF32Lanes) {
    __m256 vm = _mm256_loadu_ps(x);
    for (i = kF32Lanes; i + kF32Lanes <= n; i += kF32Lanes) {
      vm = _mm256_max_ps(vm, _mm256_loadu_ps(x + i));
    }
    alignas(32) float lanes[kF32Lanes];
    _mm256_store_ps(lanes, vm);
    m = lanes[0];
    for (float v : lanes) m = v > m ? v : m;
  }
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

double max_f64(const double* x, std::size_t n) {
  std::size_t i = 0;
  double m = x[0];
  if (n >= kF64Lanes) {
    __m256d vm = _mm256_loadu_pd(x);
    for (i = kF64Lanes; i + kF64Lanes <= n; i += kF64Lanes) {
      vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    }
    alignas(32) double lanes[kF64Lanes];
    _mm256_store_pd(lanes, vm);
    m = lanes[0];
    for (double v : lanes) m = v > m ? v : m;
  }
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

}  // namespace

const KernelTable& avx2_table_unchecked() {
  static const KernelTable table{
      "avx2",   dot_f32,   dot_f64,   axpy_f32, axpy_f64, blend_f32, blend_f64,
      scale_f32, scale_f64, relu_f32, relu_f64, max_f32,  max_f64,
  };
  return table;
}

}  // namespace svl::kernels
