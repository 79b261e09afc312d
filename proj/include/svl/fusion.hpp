#pragma once

#include <span>
#include <string>
#include <vector>

#include "svl/protocol.hpp"
#include "svl/zeroshot.hpp"

namespace svl {

struct FusionResult {
  ProbabilityMatrix probs;  // source = fused
  LambdaEstimate lambda;
  ProbSource zero_shot_source = ProbSource::kZeroShot;
  ProbSource adapter_source = ProbSource::kAdapter;
};

/// lambda * pv + (1 - lambda) * ps, elementwise. lambda = 1 returns pv and
/// lambda = 0 returns ps bit for bit.
FusionResult fuse_predictions(const ProbabilityMatrix& pv, const ProbabilityMatrix& ps, const LambdaEstimate& lambda);
FusionResult fuse_predictions(const ProbabilityMatrix& pv, const ProbabilityMatrix& ps, double lambda);

/// `count` evenly spaced values from 0 to 1 inclusive.
std::vector<double> lambda_grid(std::size_t count = protocol::kLambdaGridSize);

enum class SweepTieBreak { kSmallestLambda, kLargestLambda };

struct SweepPoint {
  double lambda = 0.0;
  double val_top1 = 0.0;
};

struct SweepResult {
  LambdaEstimate best;  // method = validation-sweep
  double best_top1 = 0.0;
  std::vector<SweepPoint> table;
};

SweepResult sweep_lambda(const ProbabilityMatrix& pv_val, const ProbabilityMatrix& ps_val,
                         std::span<const int> val_labels, std::size_t grid_size = protocol::kLambdaGridSize,
                         SweepTieBreak tie_break = SweepTieBreak::kSmallestLambda);

/// "lambda,val_top1" header plus one line per grid point.
std::string sweep_csv(const SweepResult& sweep);

}  // namespace svl
