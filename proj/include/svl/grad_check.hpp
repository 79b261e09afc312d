#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "svl/mlp.hpp"

namespace svl {

struct GradBlockReport {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradBlockReport> blocks;
  bool passed = true;
  double max_rel_error = 0.0;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Below this magnitude the relative error is measured against the floor
  // instead of the (vanishing) gradient itself.
  double magnitude_floor = 1e-6;
};

/// |a - n| / max(|a|, |n|, floor)
inline double grad_rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Central-difference check of `analytic` against `loss`, perturbing each
/// entry of each parameter block in place (restored afterwards).
inline GradCheckReport grad_check_blocks(const std::function<double()>& loss,
                                         std::span<const std::span<double>> params,
                                         std::span<const std::span<const double>> analytic,
                                         std::span<const std::string> names,
                                         const GradCheckOptions& opt = {}) {
  GradCheckReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    GradBlockReport blk;
    blk.name = b < names.size() ? names[b] : "block" + std::to_string(b);
    auto p = params[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + opt.step;
      const double up = loss();
      p[i] = saved - opt.step;
      const double down = loss();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = analytic[b][i];
      blk.max_abs_analytic = std::max(blk.max_abs_analytic, std::abs(a));
      blk.max_abs_numeric = std::max(blk.max_abs_numeric, std::abs(numeric));
      blk.max_rel_error = std::max(blk.max_rel_error, grad_rel_error(a, numeric, opt.magnitude_floor));
    }
    blk.passed = blk.max_rel_error < opt.tolerance;
    report.passed = report.passed && blk.passed;
    report.max_rel_error = std::max(report.max_rel_error, blk.max_rel_error);
    report.blocks.push_back(std::move(blk));
  }
  return report;
}

/// Checks ce_loss_and_grads for the two-layer head in 64-bit arithmetic.
inline GradCheckReport grad_check(MlpParams<double> params, const Matrix64& inputs,
                                  std::span<const int> labels, const GradCheckOptions& opt = {},
                                  Activation act = Activation::kRelu) {
  const LossAndGrads<double> lg = ce_loss_and_grads(params, inputs, labels, act);
  auto loss = [&] { return ce_loss_and_grads(params, inputs, labels, act).loss; };
  const std::span<double> p[] = {params.w1.values(), params.w2.values()};
  const std::span<const double> g[] = {lg.grads.w1.values(), lg.grads.w2.values()};
  const std::string names[] = {"w1", "w2"};
  return grad_check_blocks(loss, p, g, names, opt);
}

}  // namespace svl
