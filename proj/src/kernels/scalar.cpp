#include "kernels_impl.hpp"

namespace svl::kernels {
namespace {

template <typename T>
T dot_ref(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy_ref(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

template <typename T>
void blend_ref(T w, const T* a, const T* b, T* out, std::size_t n) {
  const T wb = T(1) - w;
  for (std::size_t i = 0; i < n; ++i) out[i] = w * a[i] + wb * b[i];
}

template <typename T>
void scale_ref(T a, T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] * a;
}

template <typename T>
void relu_ref(T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
T max_ref(const T* x, std::size_t n) {
  T m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",
      dot_ref<float>,   dot_ref<double>,   axpy_ref<float>,  axpy_ref<double>,
      blend_ref<float>, blend_ref<double>, scale_ref<float>, scale_ref<double>,
      relu_ref<float>,  relu_ref<double>,  max_ref<float>,   max_ref<double>,
  };
  return table;
}

}  // namespace svl::kernels
