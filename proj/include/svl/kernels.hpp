#pragma once

// Data-parallel inner loops. Every routine has a portable scalar reference
// and, on x86-64, an AVX2 variant chosen once at startup from CPUID.
//
// Elementwise kernels (axpy, blend, scale, relu, max) are bit-identical
// across variants: no FMA contraction, same per-element operation order.
// Reductions (dot) reassociate the sum and agree only to rounding.

#include <cstddef>
#include <string_view>

namespace svl::kernels {

struct KernelTable {
  std::string_view name;

  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  double (*dot_f64)(const double* a, const double* b, std::size_t n);

  // y[i] += a * x[i]
  void (*axpy_f32)(float a, const float* x, float* y, std::size_t n);
  void (*axpy_f64)(double a, const double* x, double* y, std::size_t n);

  // out[i] = w * a[i] + (1 - w) * b[i]; out may alias a or b.
  void (*blend_f32)(float w, const float* a, const float* b, float* out, std::size_t n);
  void (*blend_f64)(double w, const double* a, const double* b, double* out, std::size_t n);

  void (*scale_f32)(float a, float* x, std::size_t n);
  void (*scale_f64)(double a, double* x, std::size_t n);

  // x[i] = max(x[i], 0)
  void (*relu_f32)(float* x, std::size_t n);
  void (*relu_f64)(double* x, std::size_t n);

  // n >= 1
  float (*max_f32)(const float* x, std::size_t n);
  double (*max_f64)(const double* x, std::size_t n);
};

const KernelTable& scalar_table();

/// nullptr when the binary was built without AVX2 support or the CPU lacks
/// AVX2.
const KernelTable* avx2_table();

/// The table used by the library. Picks AVX2 when available unless the
/// environment variable SVL_KERNELS=scalar is set.
const KernelTable& active();

// Typed front ends so templated numerics can call one name for both widths.
inline float dot(const float* a, const float* b, std::size_t n) { return active().dot_f32(a, b, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot_f64(a, b, n); }
inline void axpy(float a, const float* x, float* y, std::size_t n) { active().axpy_f32(a, x, y, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy_f64(a, x, y, n); }
inline void blend(float w, const float* a, const float* b, float* out, std::size_t n) {
  active().blend_f32(w, a, b, out, n);
}
inline void blend(double w, const double* a, const double* b, double* out, std::size_t n) {
  active().blend_f64(w, a, b, out, n);
}
inline void scale(float a, float* x, std::size_t n) { active().scale_f32(a, x, n); }
inline void scale(double a, double* x, std::size_t n) { active().scale_f64(a, x, n); }
inline void relu(float* x, std::size_t n) { active().relu_f32(x, n); }
inline void relu(double* x, std::size_t n) { active().relu_f64(x, n); }
inline float max(const float* x, std::size_t n) { return active().max_f32(x, n); }
inline double max(const double* x, std::size_t n) { return active().max_f64(x, n); }

}  // namespace svl::kernels
