#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "svl/error.hpp"
#include "svl/matrix.hpp"
#include "svl/numerics.hpp"
#include "svl/rng.hpp"

namespace svl {

/// Bias-free two-layer head: logits = ReLU(x * w1) * w2.
template <typename T>
struct MlpParams {
  BasicMatrix<T> w1;  // input_dim x hidden_dim
  BasicMatrix<T> w2;  // hidden_dim x num_classes

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }
  std::size_t num_classes() const { return w2.cols(); }

  void validate() const {
    if (w1.cols() != w2.rows()) {
      throw ShapeError("mlp: w1.cols (" + std::to_string(w1.cols()) + ") != w2.rows (" +
                       std::to_string(w2.rows()) + ")");
    }
  }

  template <typename U>
  MlpParams<U> cast() const {
    return {w1.template cast<U>(), w2.template cast<U>()};
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Identity is a test hook that turns the head into a plain product x*w1*w2.
enum class Activation { kRelu, kIdentity };

enum class InitMode {
  kUniform,       // both layers uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
  kZeroOutput,    // w1 uniform, w2 zero: symmetric under class relabeling
  kZero,
};

template <typename T>
struct MlpForward {
  BasicMatrix<T> logits;
  BasicMatrix<T> pre_activation;  // x * w1
  BasicMatrix<T> hidden;          // act(x * w1)
};

template <typename T>
void fill_uniform_fan_in(BasicMatrix<T>& m, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(m.rows()));
  for (T& v : m.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
MlpParams<T> init_mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                      std::uint64_t seed, InitMode mode = InitMode::kUniform) {
  if (input_dim == 0 || hidden_dim == 0 || num_classes == 0) {
    throw ShapeError("mlp: dimensions must be positive");
  }
  MlpParams<T> p{BasicMatrix<T>(input_dim, hidden_dim), BasicMatrix<T>(hidden_dim, num_classes)};
  Rng rng(derive_seed(seed, 0x1417));
  if (mode != InitMode::kZero) fill_uniform_fan_in(p.w1, rng);
  if (mode == InitMode::kUniform) fill_uniform_fan_in(p.w2, rng);
  return p;
}

template <typename T>
MlpForward<T> mlp_forward(const MlpParams<T>& params, const BasicMatrix<T>& inputs,
                          Activation act = Activation::kRelu) {
  params.validate();
  if (inputs.cols() != params.input_dim()) {
    throw ShapeError("mlp_forward: input has " + std::to_string(inputs.cols()) +
                     " columns, expected " + std::to_string(params.input_dim()));
  }
  MlpForward<T> out;
  out.pre_activation = matmul(inputs, params.w1);
  out.hidden = out.pre_activation;
  if (act == Activation::kRelu) relu_inplace(out.hidden);
  out.logits = matmul(out.hidden, params.w2);
  return out;
}

template <typename T>
struct LossAndGrads {
  T loss = 0;
  MlpParams<T> grads;
};

inline void require_labels_in_range(std::span<const int> labels, std::size_t num_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw InvalidLabelError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                                  " outside [0, " + std::to_string(num_classes) + ")",
                              i);
    }
  }
}

/// Mean softmax cross-entropy over the batch plus its exact gradient with
/// respect to the logits: (softmax(z) - onehot(y)) / B. Returned in `dlogits`.
template <typename T>
T softmax_ce(const BasicMatrix<T>& logits, std::span<const int> labels, BasicMatrix<T>* dlogits) {
  const std::size_t batch = logits.rows();
  T loss = 0;
  if (dlogits) *dlogits = BasicMatrix<T>(batch, logits.cols());
  const T inv_batch = T(1) / static_cast<T>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    auto z = logits.row(i);
    const T lse = log_sum_exp(z);
    loss += lse - z[labels[i]];
    if (dlogits) {
      auto g = dlogits->row(i);
      for (std::size_t k = 0; k < z.size(); ++k) g[k] = std::exp(z[k] - lse) * inv_batch;
      g[labels[i]] -= inv_batch;
    }
  }
  return loss * inv_batch;
}

template <typename T>
LossAndGrads<T> ce_loss_and_grads(const MlpParams<T>& params, const BasicMatrix<T>& inputs,
                                  std::span<const int> labels, Activation act = Activation::kRelu) {
  if (inputs.rows() == 0) throw EmptyInputError("ce_loss_and_grads: empty batch");
  if (labels.size() != inputs.rows()) throw ShapeError("ce_loss_and_grads: labels/input length mismatch");
  require_labels_in_range(labels, params.num_classes());

  const MlpForward<T> fwd = mlp_forward(params, inputs, act);
  LossAndGrads<T> out;
  BasicMatrix<T> dlogits;
  out.loss = softmax_ce(fwd.logits, labels, &dlogits);

  out.grads.w2 = matmul_at_b(fwd.hidden, dlogits);
  BasicMatrix<T> dhidden = matmul_a_bt(dlogits, params.w2);
  if (act == Activation::kRelu) {
    for (std::size_t i = 0; i < dhidden.size(); ++i) {
      if (!(fwd.pre_activation.data()[i] > T(0))) dhidden.data()[i] = T(0);
    }
  }
  out.grads.w1 = matmul_at_b(inputs, dhidden);
  return out;
}

}  // namespace svl
