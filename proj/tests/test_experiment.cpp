#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "svl/experiment.hpp"

namespace svl {
namespace {

using testing::TempDir;

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    clusters_ = testing::make_clusters(3, 8, 5.0, 20, 10, 4);
    manifest_ = testing::write_dataset(dir_ / "data", clusters_, "toy");
  }
  RunSpec spec(Method m) const {
    RunSpec s;
    s.manifest = manifest_;
    s.method = m;
    s.train.epochs = 10;
    s.train.hidden_dim = 16;
    return s;
  }
  TempDir dir_{"experiment"};
  testing::Clusters clusters_;
  std::filesystem::path manifest_;
};

TEST(RunSpecDefaults, ProtocolValues) {
  const RunSpec s;
  EXPECT_EQ(s.shots, (std::vector<std::size_t>{1, 2, 4, 8, 16}));
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(s.temperature, 100.0);
  EXPECT_EQ(s.k, 16u);
  EXPECT_EQ(s.train.epochs, 50u);
  EXPECT_EQ(s.train.batch_size, 32u);
  EXPECT_EQ(s.train.lr, 0.001);
  EXPECT_EQ(s.train.hidden_dim, 256u);
}

TEST(Parsing, MethodsAndLambdaSettings) {
  for (const char* name :
       {"zeroshot", "linear-probe", "clip-adapter", "svl-adapter", "svl-adapter-auto", "zero-shot-svl"}) {
    EXPECT_EQ(to_string(parse_method(name)), name);
  }
  EXPECT_THROW(parse_method("tip-adapter"), ConfigError);
  EXPECT_EQ(parse_lambda_setting("auto").mode, LambdaMode::kAuto);
  EXPECT_EQ(parse_lambda_setting("sweep").mode, LambdaMode::kSweep);
  const auto fixed = parse_lambda_setting("0.35");
  EXPECT_EQ(fixed.mode, LambdaMode::kFixed);
  EXPECT_EQ(fixed.value, 0.35);
  EXPECT_EQ(to_string(fixed), "0.35");
  for (const char* bad : {"1.5", "-0.1", "x", "0.3x", ""}) EXPECT_THROW(parse_lambda_setting(bad), ConfigError) << bad;
}

TEST_F(ExperimentTest, ZeroShotIgnoresGrid) {
  const auto out = run_experiment(spec(Method::kZeroShot));
  ASSERT_EQ(out.runs.size(), 1u);
  EXPECT_EQ(out.runs[0].shots, 0u);
  EXPECT_EQ(out.runs[0].seed, 0u);
  EXPECT_FALSE(out.runs[0].lambda_used.has_value());
  EXPECT_EQ(out.aggregates.size(), 1u);
}

TEST_F(ExperimentTest, AutoGridCardinality) {
  RunSpec s = spec(Method::kSvlAdapterAuto);
  s.shots = {1, 16};
  s.seeds = {0, 1, 2};
  const auto out = run_experiment(s);
  EXPECT_EQ(out.runs.size(), 6u);
  EXPECT_EQ(out.aggregates.size(), 2u);
  for (const auto& r : out.runs) {
    ASSERT_TRUE(r.lambda_used.has_value());
    EXPECT_GE(*r.lambda_used, 1.0 / 3.0);
    EXPECT_LE(*r.lambda_used, 1.0);
  }
  EXPECT_EQ(out.runs[0].shots, 1u);
  EXPECT_EQ(out.runs[2].seed, 2u);
}

TEST_F(ExperimentTest, IdenticalSpecsGiveIdenticalBytes) {
  RunSpec s = spec(Method::kSvlAdapter);
  s.shots = {2, 4};
  s.seeds = {0, 1};
  s.output_dir = dir_ / "a";
  run_experiment(s);
  s.output_dir = dir_ / "b";
  run_experiment(s);
  for (const char* f : {"runs.csv", "report.csv", "report.md", "sweep_2_0.csv", "sweep_4_1.csv"}) {
    EXPECT_EQ(testing::read_text(dir_ / "a" / f), testing::read_text(dir_ / "b" / f)) << f;
  }
}

TEST_F(ExperimentTest, SweepPicksAGridValue) {
  RunSpec s = spec(Method::kSvlAdapter);
  const Dataset ds = load_for_method(manifest_, s.method);
  const CellOutput cell = run_cell(ds, s, 4, 1);
  ASSERT_TRUE(cell.sweep.has_value());
  EXPECT_EQ(cell.sweep->table.size(), 20u);
  ASSERT_TRUE(cell.result.lambda_used.has_value());
  bool on_grid = false;
  for (double g : lambda_grid()) on_grid = on_grid || g == *cell.result.lambda_used;
  EXPECT_TRUE(on_grid);
  EXPECT_NO_THROW(cell.test_probs.validate());
}

TEST_F(ExperimentTest, FixedLambdaIsRecorded) {
  RunSpec s = spec(Method::kSvlAdapter);
  s.lambda = parse_lambda_setting("0.25");
  const Dataset ds = load_for_method(manifest_, s.method);
  EXPECT_EQ(run_cell(ds, s, 2, 0).result.lambda_used, 0.25);
}

TEST_F(ExperimentTest, ZeroShotMethodsNeverReadTrainingLabels) {
  std::filesystem::remove(dir_ / "data" / "train.svllab");
  EXPECT_EQ(run_experiment(spec(Method::kZeroShot)).runs.size(), 1u);
  RunSpec s = spec(Method::kZeroShotSvl);
  s.seeds = {0, 1};
  const auto out = run_experiment(s);
  ASSERT_EQ(out.runs.size(), 2u);
  EXPECT_EQ(out.runs[0].shots, 0u);
  EXPECT_TRUE(out.runs[0].lambda_used.has_value());
  EXPECT_THROW(run_experiment(spec(Method::kSvlAdapter)), IoError);
}

TEST_F(ExperimentTest, BaselinesRun) {
  for (Method m : {Method::kLinearProbe, Method::kClipAdapter}) {
    RunSpec s = spec(m);
    s.shots = {4};
    s.seeds = {0};
    const auto out = run_experiment(s);
    ASSERT_EQ(out.runs.size(), 1u);
    EXPECT_FALSE(out.runs[0].lambda_used.has_value());
    EXPECT_GE(out.runs[0].top1, 0.0);
  }
}

TEST_F(ExperimentTest, InvalidSpecs) {
  RunSpec s = spec(Method::kSvlAdapter);
  s.seeds.clear();
  EXPECT_THROW(run_experiment(s), ConfigError);
  s = spec(Method::kSvlAdapter);
  s.shots = {0};
  EXPECT_THROW(run_experiment(s), ConfigError);
  s = spec(Method::kSvlAdapter);
  s.manifest.clear();
  EXPECT_THROW(run_experiment(s), ConfigError);
}

}  // namespace
}  // namespace svl
