#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "svl/eval_report.hpp"
#include "svl/pseudolabel.hpp"

namespace svl {
namespace {

using testing::probs_from_rows;

TEST(SelectPseudolabels, HandExample) {
  const auto p = probs_from_rows({{0.9, 0.1}, {0.8, 0.2}, {0.3, 0.7}});
  const auto s = select_pseudolabels(p, 1);
  ASSERT_EQ(s.by_class.size(), 2u);
  EXPECT_EQ(s.by_class[0], (std::vector<PseudoLabel>{{0, 0, 0.9}}));
  EXPECT_EQ(s.by_class[1], (std::vector<PseudoLabel>{{2, 1, 0.7}}));
  EXPECT_TRUE(s.empty_classes.empty());
}

TEST(SelectPseudolabels, ScarceClassesAreReported) {
  std::vector<std::vector<double>> rows(10, std::vector<double>{0.7, 0.1, 0.1, 0.1});
  const auto s = select_pseudolabels(probs_from_rows(rows), 16);
  EXPECT_EQ(s.by_class[0].size(), 10u);
  EXPECT_EQ(s.total(), 10u);
  EXPECT_EQ(s.empty_classes, (std::vector<int>{1, 2, 3}));
}

TEST(SelectPseudolabels, TiesGoToLowerIndex) {
  const auto p = probs_from_rows({{0.2, 0.8}, {0.2, 0.8}, {0.2, 0.8}});
  const auto s = select_pseudolabels(p, 1);
  EXPECT_EQ(s.by_class[1], (std::vector<PseudoLabel>{{0, 1, 0.8}}));
  const auto s2 = select_pseudolabels(p, 2);
  ASSERT_EQ(s2.by_class[1].size(), 2u);
  EXPECT_EQ(s2.by_class[1][1].item, 1u);
}

TEST(SelectPseudolabels, ArgmaxTieUsesLowestClass) {
  const auto s = select_pseudolabels(probs_from_rows({{0.4, 0.4, 0.2}}), 3);
  EXPECT_EQ(s.by_class[0].size(), 1u);
  EXPECT_TRUE(s.by_class[1].empty());
}

TEST(SelectPseudolabels, MatchesSortAndTakeOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = testing::random_pseudolabel_instance(rng);
    const auto got = select_pseudolabels(inst.probs, inst.k);
    const auto want = testing::pseudolabel_oracle(inst.probs, inst.k);
    ASSERT_EQ(got.by_class, want) << "trial " << trial;
    for (const auto& cls : got.by_class) {
      EXPECT_LE(cls.size(), inst.k);
      for (const auto& pl : cls) {
        EXPECT_EQ(static_cast<std::size_t>(pl.label), argmax(inst.probs.probs.row(pl.item)));
      }
    }
  }
}

TEST(SelectPseudolabels, ZeroKIsRejected) {
  EXPECT_THROW(select_pseudolabels(probs_from_rows({{1.0}}), 0), InvalidInputError);
}

TEST(SelectPseudolabels, CsvUsesItemIds) {
  const auto s = select_pseudolabels(probs_from_rows({{0.25, 0.75}}), 1);
  const std::vector<std::string> ids{"img_007"};
  EXPECT_EQ(pseudolabels_csv(s, ids), "item_id,pseudo_label,confidence\nimg_007,1,0.75\n");
  EXPECT_EQ(pseudolabels_csv(s), "item_id,pseudo_label,confidence\n0,1,0.75\n");
}

TEST(ZeroShotAdapt, ConfidentCorrectZeroShotIsNotHurt) {
  const auto c = testing::make_clusters(4, 16, 8.0, 1, 50, 21);
  const auto pv = zero_shot_probs(c.test, c.means);
  const double zs_acc = top1_accuracy(pv, c.test_labels);
  ASSERT_GE(zs_acc, 0.99);
  TrainConfig cfg;
  cfg.hidden_dim = 32;
  const auto r = zero_shot_adapt(make_table(c.test), pv, 16, cfg);
  for (const auto& pl : r.pseudo_labels.flat()) EXPECT_EQ(pl.label, c.test_labels[pl.item]);
  EXPECT_EQ(r.pseudo_labels.total(), 64u);
  EXPECT_GE(top1_accuracy(r.fusion.probs, c.test_labels), zs_acc);
  EXPECT_EQ(r.fusion.lambda.value, estimate_lambda(pv).value);
  EXPECT_EQ(r.fusion.lambda.method, LambdaMethod::kAutoConfidence);
}

TEST(ZeroShotAdapt, DefaultKIsSixteen) { EXPECT_EQ(protocol::kPseudoLabelsPerClass, 16u); }

TEST(ZeroShotAdapt, MisalignedInputs) {
  Rng rng(1);
  const auto pv = testing::random_probs(5, 3, rng);
  EXPECT_THROW(zero_shot_adapt(make_table(testing::random_matrix(4, 3, rng)), pv, 2, TrainConfig{}), ShapeError);
}

}  // namespace
}  // namespace svl
