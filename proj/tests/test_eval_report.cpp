#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "svl/eval_report.hpp"

namespace svl {
namespace {

using testing::probs_from_rows;

RunResult run(const std::string& method, std::size_t shots, std::uint64_t seed, double top1,
              std::optional<double> lambda = std::nullopt) {
  return {"toy", method, shots, seed, top1, lambda};
}

TEST(Top1, PerfectAdversarialAndPartial) {
  const auto p = probs_from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  EXPECT_EQ(top1_accuracy(p, std::vector<int>{0, 1, 2}), 1.0);
  EXPECT_EQ(top1_accuracy(p, std::vector<int>{1, 2, 0}), 0.0);
  EXPECT_DOUBLE_EQ(top1_accuracy(p, std::vector<int>{0, 1, 0}), 2.0 / 3.0);
}

TEST(Top1, TiesResolveToLowestClass) {
  const auto p = probs_from_rows({{0.5, 0.5}});
  EXPECT_EQ(top1_accuracy(p, std::vector<int>{0}), 1.0);
  EXPECT_EQ(predict_labels(p.probs), std::vector<int>{0});
}

TEST(Top1, InvariantUnderArgmaxPreservingTransforms) {
  Rng rng(3);
  const auto p = testing::random_probs(50, 6, rng);
  const auto labels = testing::random_labels(50, 6, rng);
  Matrix64 q = p.probs;
  for (double& v : q.values()) v = std::sqrt(v) * 3.0 + 1.0;
  EXPECT_EQ(top1_accuracy(q, labels), top1_accuracy(p, labels));
}

TEST(Top1, LengthMismatch) {
  EXPECT_THROW(top1_accuracy(probs_from_rows({{1.0}}), std::vector<int>{0, 0}), ShapeError);
}

TEST(Aggregate, HandCases) {
  const std::vector<RunResult> constant{run("m", 1, 0, 0.5), run("m", 1, 1, 0.5), run("m", 1, 2, 0.5)};
  auto a = aggregate_group(constant);
  EXPECT_EQ(a.mean_top1, 0.5);
  EXPECT_EQ(a.std_top1, 0.0);
  EXPECT_EQ(a.num_runs, 3u);

  const std::vector<RunResult> two{run("m", 1, 0, 0.4), run("m", 1, 1, 0.6)};
  a = aggregate_group(two);
  EXPECT_NEAR(a.mean_top1, 0.5, 1e-15);
  EXPECT_NEAR(a.std_top1, 0.1, 1e-15);

  const std::vector<RunResult> one{run("m", 1, 0, 0.37, 0.8)};
  a = aggregate_group(one);
  EXPECT_EQ(a.mean_top1, 0.37);
  EXPECT_EQ(a.std_top1, 0.0);
  EXPECT_EQ(a.mean_lambda, 0.8);

  EXPECT_THROW(aggregate_group(std::vector<RunResult>{}), EmptyInputError);
}

TEST(Aggregate, GroupsByDatasetMethodShots) {
  const std::vector<RunResult> runs{run("b", 16, 0, 0.9), run("a", 1, 0, 0.2), run("a", 16, 1, 0.8),
                                    run("a", 1, 1, 0.4),  run("a", 16, 0, 0.6)};
  const auto aggs = aggregate_runs(runs);
  ASSERT_EQ(aggs.size(), 3u);
  EXPECT_EQ(aggs[0].method, "a");
  EXPECT_EQ(aggs[0].shots, 1u);
  EXPECT_NEAR(aggs[0].mean_top1, 0.3, 1e-15);
  EXPECT_EQ(aggs[1].shots, 16u);
  EXPECT_EQ(aggs[2].method, "b");
  for (const auto& a : aggs) EXPECT_GE(a.std_top1, 0.0);
}

TEST(Aggregate, MeanWithinGroupRange) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RunResult> g;
    double lo = 1, hi = 0;
    for (std::uint64_t s = 0; s < 1 + rng.uniform_index(6); ++s) {
      const double v = rng.uniform01();
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      g.push_back(run("m", 2, s, v));
    }
    const auto a = aggregate_group(g);
    EXPECT_GE(a.mean_top1, lo);
    EXPECT_LE(a.mean_top1, hi);
  }
}

TEST(Report, HeaderOnlyForEmptyInput) {
  EXPECT_EQ(emit_report({}, ReportFormat::kCsv), "dataset,method,shots,seed_count,mean_top1,std_top1,lambda\n");
  const std::string md = emit_report({}, ReportFormat::kMarkdown);
  EXPECT_EQ(std::count(md.begin(), md.end(), '\n'), 2);
}

TEST(Report, OneRowAndDeterministicBytes) {
  const std::vector<RunResult> runs{run("svl-adapter", 4, 0, 0.4, 0.3), run("svl-adapter", 4, 1, 0.6, 0.5)};
  const auto aggs = aggregate_runs(runs);
  const std::string csv = emit_report(aggs, ReportFormat::kCsv);
  EXPECT_EQ(csv,
            "dataset,method,shots,seed_count,mean_top1,std_top1,lambda\n"
            "toy,svl-adapter,4,2,0.500000,0.100000,0.400000\n");
  EXPECT_EQ(emit_report(aggregate_runs(runs), ReportFormat::kCsv), csv);
  EXPECT_EQ(emit_report(aggs, ReportFormat::kMarkdown), emit_report(aggs, ReportFormat::kMarkdown));
}

TEST(RunsCsv, RoundTrip) {
  std::vector<RunResult> runs{run("zeroshot", 0, 0, 0.25), run("svl-adapter", 16, 2, 1.0 / 3.0, 0.1)};
  const auto back = parse_runs_csv(runs_csv(runs));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].top1, 1.0 / 3.0);
  EXPECT_EQ(back[1].lambda_used, 0.1);
  EXPECT_FALSE(back[0].lambda_used.has_value());
  EXPECT_EQ(runs_csv(back), runs_csv(runs));
  EXPECT_THROW(parse_runs_csv("bogus\n"), FormatError);
}

TEST(SortRuns, MethodShotsSeedOrder) {
  std::vector<RunResult> runs{run("b", 1, 0, 0), run("a", 2, 1, 0), run("a", 2, 0, 0), run("a", 1, 5, 0)};
  sort_runs(runs);
  EXPECT_EQ(runs[0].shots, 1u);
  EXPECT_EQ(runs[1].seed, 0u);
  EXPECT_EQ(runs[2].seed, 1u);
  EXPECT_EQ(runs[3].method, "b");
}

}  // namespace
}  // namespace svl
