#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svl/zeroshot.hpp"

namespace svl {

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double top1_accuracy(const ProbabilityMatrix& probs, std::span<const int> labels);
double top1_accuracy(const Matrix64& probs, std::span<const int> labels);

/// Row argmax, ties to the lowest class index.
std::vector<int> predict_labels(const Matrix64& probs);

struct RunResult {
  std::string dataset;
  std::string method;
  std::size_t shots = 0;  // 0 for zero-shot methods
  std::uint64_t seed = 0;
  double top1 = 0.0;
  std::optional<double> lambda_used;
};

struct AggregateResult {
  std::string dataset;
  std::string method;
  std::size_t shots = 0;
  std::size_t num_runs = 0;
  double mean_top1 = 0.0;
  double std_top1 = 0.0;  // population standard deviation
  std::optional<double> mean_lambda;
};

/// Aggregates one (dataset, method, shots) group.
AggregateResult aggregate_group(std::span<const RunResult> group);

/// Groups by (dataset, method, shots) and aggregates each group; output is
/// sorted by that key.
std::vector<AggregateResult> aggregate_runs(std::span<const RunResult> results);

/// Orders results by (method, shots, seed), then dataset.
void sort_runs(std::vector<RunResult>& results);

enum class ReportFormat { kCsv, kMarkdown };

/// Columns: dataset,method,shots,seed_count,mean_top1,std_top1,lambda.
std::string emit_report(std::span<const AggregateResult> aggregates, ReportFormat format);

/// Per-run rows: dataset,method,shots,seed,top1,lambda.
std::string runs_csv(std::span<const RunResult> results);
std::vector<RunResult> parse_runs_csv(const std::string& text, const std::string& source = "runs.csv");

}  // namespace svl
