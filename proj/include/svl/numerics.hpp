#pragma once

#include <cmath>
#include <span>
#include <string>

#include "svl/error.hpp"
#include "svl/kernels.hpp"
#include "svl/matrix.hpp"

namespace svl {

template <typename T>
void require_finite(const BasicMatrix<T>& m, const std::string& what) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i])) {
      throw InvalidInputError(what + ": non-finite entry at row " + std::to_string(i / m.cols()) +
                              ", col " + std::to_string(i % m.cols()));
    }
  }
}

/// C = A * B   (N x D) * (D x K)
template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  BasicMatrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* out = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      if (aik != T(0)) kernels::axpy(aik, b.row(k).data(), out, b.cols());
    }
  }
  return c;
}

/// C = A^T * B   (N x D)^T * (N x K) -> D x K
template <typename T>
BasicMatrix<T> matmul_at_b(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_at_b: row counts differ");
  BasicMatrix<T> c(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const T* brow = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T ari = a(r, i);
      if (ari != T(0)) kernels::axpy(ari, brow, c.row(i).data(), b.cols());
    }
  }
  return c;
}

/// C = A * B^T   (N x D) * (K x D)^T -> N x K
template <typename T>
BasicMatrix<T> matmul_a_bt(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_a_bt: column counts differ");
  BasicMatrix<T> c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      c(i, j) = kernels::dot(a.row(i).data(), b.row(j).data(), a.cols());
    }
  }
  return c;
}

template <typename T>
void softmax_row_inplace(std::span<T> row) {
  const T m = kernels::max(row.data(), row.size());
  T sum = 0;
  for (T& v : row) {
    v = std::exp(v - m);
    sum += v;
  }
  const T inv = T(1) / sum;
  kernels::scale(inv, row.data(), row.size());
}

/// Row-wise softmax with per-row max subtraction.
template <typename T>
BasicMatrix<T> softmax(const BasicMatrix<T>& logits) {
  require_finite(logits, "softmax");
  BasicMatrix<T> out = logits;
  if (out.cols() == 0) return out;
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_row_inplace(out.row(r));
  return out;
}

/// log(sum(exp(row))), stable.
template <typename T>
T log_sum_exp(std::span<const T> row) {
  const T m = kernels::max(row.data(), row.size());
  T sum = 0;
  for (T v : row) sum += std::exp(v - m);
  return m + std::log(sum);
}

template <typename T>
void relu_inplace(BasicMatrix<T>& m) {
  kernels::relu(m.data(), m.size());
}

/// Index of the row maximum; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

inline std::size_t argmax(std::span<const double> row) { return argmax<double>(row); }
inline std::size_t argmax(std::span<const float> row) { return argmax<float>(row); }

/// Scales each row to unit L2 norm. A zero row is an error.
template <typename T>
BasicMatrix<T> l2_normalize_rows(const BasicMatrix<T>& m) {
  BasicMatrix<T> out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const T sq = kernels::dot(row.data(), row.data(), row.size());
    if (!(sq > T(0)) || !std::isfinite(sq)) {
      throw DegenerateEmbeddingError("row " + std::to_string(r) + " has zero or non-finite norm", r);
    }
    const T inv = T(1) / std::sqrt(sq);
    kernels::scale(inv, row.data(), row.size());
  }
  return out;
}

}  // namespace svl
