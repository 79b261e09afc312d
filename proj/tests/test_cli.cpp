#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>

#include "fixtures.hpp"
#include "svl/embedding_store.hpp"
#include "svl/eval_report.hpp"
#include "svl/io.hpp"

namespace svl {
namespace {

using testing::TempDir;

struct Result {
  int status = -1;
  std::string out;
};

Result svl_cli(const std::string& args) {
  const std::string cmd = std::string(SVL_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int st = ::pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    manifest_ = testing::write_dataset(dir_ / "data", testing::make_clusters(3, 8, 5.0, 12, 10, 9), "toy").string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  TempDir dir_{"cli"};
  std::string manifest_;
};

TEST_F(CliTest, ExtractCheckAcceptsGoodFilesAndRejectsCorruptOnes) {
  auto r = svl_cli("extract-check --manifest " + manifest_ + " " + (dir_ / "data" / "train.svlemb").string() + " " +
                   (dir_ / "data" / "train.svllab").string());
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("dataset=toy dim=8 classes=3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("embeddings 36x8"), std::string::npos);
  EXPECT_NE(r.out.find("labels 36"), std::string::npos);

  auto bytes = io::read_file_bytes(dir_ / "data" / "test.svlemb");
  bytes[0] = 'Z';
  io::write_file_atomic(dir_ / "bad.svlemb", bytes);
  EXPECT_EQ(svl_cli("extract-check " + path("bad.svlemb")).status, 5);
  EXPECT_EQ(svl_cli("extract-check " + path("missing.svlemb")).status, 6);
}

TEST_F(CliTest, ZeroShotWritesArtifacts) {
  const auto r = svl_cli("zeroshot --manifest " + manifest_ + " --out " + path("zs"));
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("top1="), std::string::npos);
  const auto probs = read_matrix(dir_ / "zs" / "zeroshot_probs.svlemb").matrix;
  EXPECT_EQ(probs.rows(), 30u);
  EXPECT_EQ(testing::read_text(dir_ / "zs" / "histogram.csv").rfind("bin_lo,bin_hi,count\n", 0), 0u);
}

TEST_F(CliTest, RunHonorsConfigWithFlagsWinning) {
  io::write_file_atomic(dir_ / "run.cfg", std::string("method=svl-adapter-auto\nshots=1,16\nseeds=0,1,2\nepochs=3\n"
                                                      "hidden=8\nmanifest=" + manifest_ + "\n"));
  auto r = svl_cli("run --config " + path("run.cfg") + " --seeds 4,5 --out " + path("grid"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto runs = parse_runs_csv(testing::read_text(dir_ / "grid" / "runs.csv"));
  ASSERT_EQ(runs.size(), 4u);
  EXPECT_EQ(runs[0].seed, 4u);
  EXPECT_EQ(runs[3].shots, 16u);
  EXPECT_EQ(runs[0].method, "svl-adapter-auto");

  r = svl_cli("report --runs " + path("grid/runs.csv") + " --format csv");
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(r.out, testing::read_text(dir_ / "grid" / "report.csv"));
}

TEST_F(CliTest, AdaptWritesAdapterAndSweep) {
  const auto r = svl_cli("adapt --manifest " + manifest_ + " --method svl-adapter --shots 4 --seed 1 --epochs 3 "
                         "--hidden 8 --lambda sweep --out " + path("cell"));
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "cell" / "svl.adapter"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "cell" / "sweep.csv"));
  EXPECT_NE(r.out.find("lambda="), std::string::npos);
}

TEST_F(CliTest, PseudoAndLambdaCommands) {
  auto r = svl_cli("pseudo --manifest " + manifest_ + " --k 2 --out " + path("pl.csv"));
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(testing::read_text(dir_ / "pl.csv").rfind("item_id,pseudo_label,confidence\n", 0), 0u);

  r = svl_cli("lambda estimate --manifest " + manifest_);
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(r.out.rfind("lambda=", 0), 0u);

  ProbabilityMatrix pv = testing::uniform_probs(4, 2);
  write_matrix(dir_ / "pv.svlemb", pv.probs.cast<float>());
  write_matrix(dir_ / "ps.svlemb", Matrix(4, 2, std::vector<float>{1, 0, 0, 1, 1, 0, 0, 1}));
  write_labels(dir_ / "val.svllab", std::vector<int>{0, 1, 0, 1});
  r = svl_cli("lambda sweep --pv " + path("pv.svlemb") + " --ps " + path("ps.svlemb") + " --labels " +
              path("val.svllab"));
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("best_lambda=0\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, ErrorsMapToExitCodes) {
  EXPECT_EQ(svl_cli("run --manifest " + manifest_ + " --lambda 2").status, 12);
  EXPECT_EQ(svl_cli("run --manifest " + manifest_ + " --method nope").status, 12);
  EXPECT_EQ(svl_cli("zeroshot --manifest " + path("none.txt")).status, 6);
  EXPECT_NE(svl_cli("").status, 0);
}

}  // namespace
}  // namespace svl
