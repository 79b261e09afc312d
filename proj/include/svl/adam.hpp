#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "svl/error.hpp"
#include "svl/mlp.hpp"

namespace svl {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers, one per parameter block.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step_count = 0;
};

/// One Adam update with bias correction. Blocks are matched positionally;
/// moment buffers are allocated on the first call.
template <typename T>
void adam_step(AdamState<T>& state, std::span<const std::span<T>> params,
               std::span<const std::span<const T>> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: block count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), T(0));
      state.v.emplace_back(p.size(), T(0));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state/param block mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.m[b].size()) {
      throw ShapeError("adam_step: block " + std::to_string(b) + " size mismatch");
    }
  }

  ++state.step_count;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step_count);
  const T b1 = static_cast<T>(c.beta1);
  const T b2 = static_cast<T>(c.beta2);
  const T corr1 = static_cast<T>(1.0 - std::pow(c.beta1, t));
  const T corr2 = static_cast<T>(1.0 - std::pow(c.beta2, t));
  const T lr = static_cast<T>(c.lr);
  const T eps = static_cast<T>(c.epsilon);

  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const T m_hat = m[i] / corr1;
      const T v_hat = v[i] / corr2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
void adam_step(AdamState<T>& state, MlpParams<T>& params, const MlpParams<T>& grads) {
  const std::span<T> p[] = {params.w1.values(), params.w2.values()};
  const std::span<const T> g[] = {grads.w1.values(), grads.w2.values()};
  adam_step<T>(state, p, g);
}

}  // namespace svl
