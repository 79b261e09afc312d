#include "svl/eval_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "svl/error.hpp"
#include "svl/io.hpp"
#include "svl/numerics.hpp"

namespace svl {

std::vector<int> predict_labels(const Matrix64& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) out[r] = static_cast<int>(argmax(probs.row(r)));
  return out;
}

double top1_accuracy(const Matrix64& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size()) {
    throw ShapeError("top1_accuracy: " + std::to_string(probs.rows()) + " rows, " + std::to_string(labels.size()) +
                     " labels");
  }
  if (labels.empty()) throw EmptyInputError("top1_accuracy: no rows");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    if (static_cast<int>(argmax(probs.row(r))) == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double top1_accuracy(const ProbabilityMatrix& probs, std::span<const int> labels) {
  return top1_accuracy(probs.probs, labels);
}

AggregateResult aggregate_group(std::span<const RunResult> group) {
  if (group.empty()) throw EmptyInputError("aggregate_group: empty group");
  AggregateResult agg;
  agg.dataset = group.front().dataset;
  agg.method = group.front().method;
  agg.shots = group.front().shots;
  agg.num_runs = group.size();
  double sum = 0;
  double lambda_sum = 0;
  std::size_t lambda_count = 0;
  for (const RunResult& r : group) {
    sum += r.top1;
    if (r.lambda_used) {
      lambda_sum += *r.lambda_used;
      ++lambda_count;
    }
  }
  agg.mean_top1 = sum / static_cast<double>(group.size());
  double sq = 0;
  for (const RunResult& r : group) sq += (r.top1 - agg.mean_top1) * (r.top1 - agg.mean_top1);
  agg.std_top1 = std::sqrt(sq / static_cast<double>(group.size()));
  if (lambda_count > 0) agg.mean_lambda = lambda_sum / static_cast<double>(lambda_count);
  return agg;
}

std::vector<AggregateResult> aggregate_runs(std::span<const RunResult> results) {
  std::map<std::tuple<std::string, std::string, std::size_t>, std::vector<RunResult>> groups;
  for (const RunResult& r : results) groups[{r.dataset, r.method, r.shots}].push_back(r);
  std::vector<AggregateResult> out;
  for (auto& [key, group] : groups) {
    std::sort(group.begin(), group.end(), [](const RunResult& a, const RunResult& b) { return a.seed < b.seed; });
    out.push_back(aggregate_group(group));
  }
  return out;
}

void sort_runs(std::vector<RunResult>& results) {
  std::stable_sort(results.begin(), results.end(), [](const RunResult& a, const RunResult& b) {
    return std::tie(a.method, a.shots, a.seed, a.dataset) < std::tie(b.method, b.shots, b.seed, b.dataset);
  });
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string lambda_cell(const std::optional<double>& l) { return l ? fixed6(*l) : std::string(); }

}  // namespace

std::string emit_report(std::span<const AggregateResult> aggregates, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::kCsv) {
    out = "dataset,method,shots,seed_count,mean_top1,std_top1,lambda\n";
    for (const AggregateResult& a : aggregates) {
      out += a.dataset + "," + a.method + "," + std::to_string(a.shots) + "," + std::to_string(a.num_runs) + "," +
             fixed6(a.mean_top1) + "," + fixed6(a.std_top1) + "," + lambda_cell(a.mean_lambda) + "\n";
    }
    return out;
  }
  out = "| dataset | method | shots | seed_count | mean_top1 | std_top1 | lambda |\n";
  out += "|---|---|---:|---:|---:|---:|---:|\n";
  for (const AggregateResult& a : aggregates) {
    out += "| " + a.dataset + " | " + a.method + " | " + std::to_string(a.shots) + " | " + std::to_string(a.num_runs) +
           " | " + fixed6(a.mean_top1) + " | " + fixed6(a.std_top1) + " | " + lambda_cell(a.mean_lambda) + " |\n";
  }
  return out;
}

std::string runs_csv(std::span<const RunResult> results) {
  std::string out = "dataset,method,shots,seed,top1,lambda\n";
  for (const RunResult& r : results) {
    out += r.dataset + "," + r.method + "," + std::to_string(r.shots) + "," + std::to_string(r.seed) + "," +
           io::format_double(r.top1) + "," + (r.lambda_used ? io::format_double(*r.lambda_used) : "") + "\n";
  }
  return out;
}

std::vector<RunResult> parse_runs_csv(const std::string& text, const std::string& source) {
  std::vector<RunResult> out;
  const auto lines = io::split(text, '\n');
  std::size_t line_no = 0;
  for (const std::string& raw : lines) {
    ++line_no;
    const std::string line = io::trim(raw);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "dataset,method,shots,seed,top1,lambda") {
        throw FormatError(FormatErrorKind::kSyntax, source + ": unexpected header '" + line + "'");
      }
      continue;
    }
    const auto cells = io::split(line, ',');
    if (cells.size() != 6) {
      throw FormatError(FormatErrorKind::kSyntax, source + ":" + std::to_string(line_no) + ": expected 6 columns");
    }
    try {
      RunResult r;
      r.dataset = cells[0];
      r.method = cells[1];
      r.shots = std::stoull(cells[2]);
      r.seed = std::stoull(cells[3]);
      r.top1 = std::stod(cells[4]);
      if (!cells[5].empty()) r.lambda_used = std::stod(cells[5]);
      if (!(r.top1 >= 0.0 && r.top1 <= 1.0)) throw std::out_of_range("top1");
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError(FormatErrorKind::kSyntax, source + ":" + std::to_string(line_no) + ": malformed value");
    }
  }
  return out;
}

}  // namespace svl
