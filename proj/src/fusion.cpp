#include "svl/fusion.hpp"

#include "svl/error.hpp"
#include "svl/eval_report.hpp"
#include "svl/io.hpp"
#include "svl/kernels.hpp"

namespace svl {

FusionResult fuse_predictions(const ProbabilityMatrix& pv, const ProbabilityMatrix& ps, const LambdaEstimate& lambda) {
  if (pv.rows() != ps.rows() || pv.cols() != ps.cols()) {
    throw ShapeError("fuse_predictions: " + std::to_string(pv.rows()) + "x" + std::to_string(pv.cols()) + " vs " +
                     std::to_string(ps.rows()) + "x" + std::to_string(ps.cols()));
  }
  if (!(lambda.value >= 0.0 && lambda.value <= 1.0)) {
    throw InvalidInputError("fuse_predictions: lambda " + io::format_double(lambda.value) + " outside [0, 1]");
  }
  pv.validate();
  ps.validate();

  FusionResult out;
  out.lambda = lambda;
  out.zero_shot_source = pv.source;
  out.adapter_source = ps.source;
  out.probs.probs = Matrix64(pv.rows(), pv.cols());
  out.probs.source = ProbSource::kFused;
  out.probs.temperature_used = pv.temperature_used;
  kernels::blend(lambda.value, pv.probs.data(), ps.probs.data(), out.probs.probs.data(), pv.probs.size());
  return out;
}

FusionResult fuse_predictions(const ProbabilityMatrix& pv, const ProbabilityMatrix& ps, double lambda) {
  return fuse_predictions(pv, ps, LambdaEstimate{lambda, pv.rows(), LambdaMethod::kFixed});
}

std::vector<double> lambda_grid(std::size_t count) {
  if (count < 2) throw InvalidInputError("lambda grid needs at least two points");
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(count - 1);
  return grid;
}

SweepResult sweep_lambda(const ProbabilityMatrix& pv_val, const ProbabilityMatrix& ps_val,
                         std::span<const int> val_labels, std::size_t grid_size, SweepTieBreak tie_break) {
  if (val_labels.empty() || pv_val.rows() == 0) throw EmptyInputError("sweep_lambda: empty validation set");
  SweepResult out;
  bool have_best = false;
  for (double lambda : lambda_grid(grid_size)) {
    const FusionResult fused = fuse_predictions(pv_val, ps_val, lambda);
    const double acc = top1_accuracy(fused.probs, val_labels);
    out.table.push_back({lambda, acc});
    const bool better = !have_best || acc > out.best_top1 ||
                        (acc == out.best_top1 && tie_break == SweepTieBreak::kLargestLambda);
    if (better) {
      out.best_top1 = acc;
      out.best.value = lambda;
      have_best = true;
    }
  }
  out.best.num_items = val_labels.size();
  out.best.method = LambdaMethod::kValidationSweep;
  return out;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "lambda,val_top1\n";
  for (const SweepPoint& p : sweep.table) out += io::format_double(p.lambda) + "," + io::format_double(p.val_top1) + "\n";
  return out;
}

}  // namespace svl
