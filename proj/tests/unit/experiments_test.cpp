// Copyright 2026 The Savanna Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "savanna/error.hpp"
#include "savanna/experiments.hpp"

namespace savanna {
namespace {

FeatureBankConfig light_bank() {
  FeatureBankConfig c;
  c.patches.n_total = 1500;
  c.patches.n_positive = 400;
  c.kmeans.k = 8;
  c.kmeans.max_iter = 15;
  return c;
}

class SmallBench : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    bench_ = new fixtures::Benchmark(fixtures::make_benchmark(fixtures::small_params(6), light_bank()));
  }
  static void TearDownTestSuite() {
    delete bench_;
    bench_ = nullptr;
  }
  static fixtures::Benchmark* bench_;
};

fixtures::Benchmark* SmallBench::bench_ = nullptr;

TEST(ResampleFactor, WholeRatiosOnly) {
  EXPECT_EQ(resample_factor(4, 8), 2);
  EXPECT_EQ(resample_factor(4, 4), 1);
  EXPECT_EQ(resample_factor(4, 16), 4);
  EXPECT_THROW(resample_factor(4, 6), Error);
  EXPECT_THROW(resample_factor(8, 4), Error);
}

TEST(SplitImages, DisjointCoveringAndSeeded) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("img" + std::to_string(i));
  auto s = split_images(ids, 2.0 / 3.0, 7);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.test.size(), 3u);
  std::set<std::string> all(s.train.begin(), s.train.end());
  for (auto const& t : s.test) EXPECT_TRUE(all.insert(t).second);
  EXPECT_EQ(all.size(), 10u);
  auto again = split_images(ids, 2.0 / 3.0, 7);
  EXPECT_EQ(again.train, s.train);
  EXPECT_NE(split_images(ids, 2.0 / 3.0, 8).train, s.train);
  EXPECT_THROW(split_images(ids, 1.5, 7), Error);
}

TEST(RowsInImages, KeepsProposalOrder) {
  std::vector<Proposal> props(4);
  props[0].image_id = "b";
  props[1].image_id = "a";
  props[2].image_id = "c";
  props[3].image_id = "b";
  std::vector<std::string> keep{"b", "a"};
  EXPECT_EQ(rows_in_images(props, keep), (std::vector<std::size_t>{0, 1, 3}));
}

TEST(ClassRatio, RoundsNegativesPerPositive) {
  EXPECT_EQ(class_ratio(10, 3000), "1:300");
  EXPECT_EQ(class_ratio(3, 1000), "1:333");
  EXPECT_EQ(class_ratio(4, 2), "1:1");
  EXPECT_EQ(class_ratio(0, 5), "1:inf");
}

RasterImage at_time(std::string id, char const* t) {
  return RasterImage(std::move(id), 1, 1, 4.0, Timestamp::parse(t));
}

TEST(SplitByPeriod, InclusiveBoundsAndUnassigned) {
  std::vector<RasterImage> imgs{at_time("m0", "2014-05-12T09:13:00"), at_time("m1", "09:28:00"),
                                at_time("x", "09:28:01"), at_time("d0", "13:30")};
  auto periods = default_periods();
  ASSERT_EQ(periods.size(), 2u);
  auto s = split_by_period(imgs, periods);
  EXPECT_EQ(s.subsets.at(periods[0].name), (std::vector<std::string>{"m0", "m1"}));
  EXPECT_EQ(s.subsets.at(periods[1].name), (std::vector<std::string>{"d0"}));
  EXPECT_EQ(s.unassigned, (std::vector<std::string>{"x"}));
  imgs.emplace_back("none", 1, 1, 4.0);
  EXPECT_THROW(split_by_period(imgs, periods), Error);
}

TEST(EqualizeCounts, SmallestGroupSizeOrderPreserved) {
  std::map<std::string, std::vector<std::size_t>> g{{"a", {1, 2, 3, 4, 5}}, {"b", {9, 8}}};
  auto e = equalize_counts(g, 3);
  EXPECT_EQ(e.at("b"), (std::vector<std::size_t>{9, 8}));
  ASSERT_EQ(e.at("a").size(), 2u);
  EXPECT_TRUE(std::is_sorted(e.at("a").begin(), e.at("a").end()));
  EXPECT_EQ(equalize_counts(g, 3), e);
}

TEST(ExperimentConfig, CellsCollapseHocOverK) {
  ExperimentConfig c;
  c.kinds = {FeatureKind::kHoc, FeatureKind::kBovw};
  c.ks = {100, 300};
  c.gsds_cm = {8, 12};
  auto cells = c.cells();
  EXPECT_EQ(cells.size(), 2u + 4u);
  for (auto const& k : cells) {
    if (k.kind == FeatureKind::kHoc) EXPECT_EQ(k.k, 0);
  }
  c.repeats = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST_F(SmallBench, ImagesAtAreBlockMeans) {
  auto& bank = *bench_->bank;
  auto const& coarse = bank.images_at(12.0);
  auto expected = oracle::block_average(bank.native_images()[0], 3);
  ASSERT_EQ(coarse[0].width(), expected.width());
  for (int y = 0; y < expected.height(); ++y) {
    for (int x = 0; x < expected.width(); ++x) ASSERT_EQ(coarse[0].pixel(x, y), expected.pixel(x, y));
  }
  EXPECT_DOUBLE_EQ(coarse[0].gsd_cm(), 12.0);
}

TEST_F(SmallBench, HocRowsMatchDirectExtraction) {
  auto& bank = *bench_->bank;
  auto const& m = bank.hoc(8.0);
  ASSERT_EQ(m.rows(), bank.proposals().size());
  auto const& imgs = bank.images_at(8.0);
  for (std::size_t i = 0; i < m.rows(); i += 37) {
    auto const& p = bank.proposals()[i];
    EXPECT_EQ(bank.centroid_at(i, 8.0), p.centroid);
    auto it = std::find_if(imgs.begin(), imgs.end(), [&](auto const& im) { return im.id() == p.image_id; });
    auto v = extract_hoc(*it, p.centroid);
    for (std::size_t j = 0; j < v.values.size(); ++j) ASSERT_EQ(m.values(static_cast<Eigen::Index>(i), j), v.values[j]);
  }
}

TEST_F(SmallBench, BovwRowsCountWords) {
  auto& bank = *bench_->bank;
  auto const& m = bank.bovw(8.0, 8);
  ASSERT_EQ(m.values.cols(), 8);
  for (std::size_t i = 0; i < m.rows(); ++i) EXPECT_EQ(m.values.row(static_cast<Eigen::Index>(i)).sum(), kWindow * kWindow);
  EXPECT_EQ(bank.codebook(8.0, 8).k, 8);
  Codebook wrong;
  wrong.k = 3;
  wrong.dim = 5;
  EXPECT_THROW(bank.set_codebook(8.0, 3, wrong), Error);
}

TEST_F(SmallBench, PreparedFeaturesUseTrainStatistics) {
  auto& b = *bench_;
  auto pf = prepare_features(*b.bank, FeatureKind::kCombined, 8, 8.0, b.train_rows, b.test_rows);
  ASSERT_EQ(pf.train.rows(), static_cast<Eigen::Index>(b.train_rows.size()));
  ASSERT_EQ(pf.test.rows(), static_cast<Eigen::Index>(b.test_rows.size()));
  EXPECT_EQ(pf.train.cols(), 3 * kHocBins + 8);
  for (Eigen::Index i = 0; i < pf.train.rows(); ++i) {
    double n = pf.train.row(i).norm();
    EXPECT_TRUE(std::abs(n - 1.0) < 1e-9 || n == 0.0);
  }
  auto hoc = prepare_features(*b.bank, FeatureKind::kHoc, 0, 8.0, b.train_rows, b.test_rows);
  auto direct = normalize_features(b.bank->hoc(8.0).select(b.train_rows).values);
  EXPECT_LT((hoc.train - direct.train).norm(), 1e-12);
  EXPECT_NE(hoc.fingerprint, pf.fingerprint);
}

TEST_F(SmallBench, SplitIsImageDisjoint) {
  auto& b = *bench_;
  std::set<std::string> train(b.split.train.begin(), b.split.train.end());
  for (auto r : b.train_rows) EXPECT_TRUE(train.count(b.props[r].image_id));
  for (auto r : b.test_rows) EXPECT_FALSE(train.count(b.props[r].image_id));
  EXPECT_EQ(b.train_rows.size() + b.test_rows.size(), b.props.size());
}

TEST_F(SmallBench, BalancedAblationIsPairedAndDeterministic) {
  auto& b = *bench_;
  ExperimentConfig cfg;
  cfg.kinds = {FeatureKind::kHoc};
  cfg.repeats = 2;
  cfg.c_grid = {0.1, 1.0};
  cfg.cv_folds = 3;
  auto r = run_balanced_ablation(*b.bank, b.train_rows, b.test_rows, cfg);
  ASSERT_EQ(r.size(), 1u);
  ASSERT_EQ(r[0].runs.size(), 2u);
  EXPECT_EQ(r[0].chosen_c.size(), 2u);
  EXPECT_NEAR(r[0].mean.auc, 0.5 * (r[0].runs[0].auc + r[0].runs[1].auc), 1e-12);
  EXPECT_GT(r[0].mean.auc, 0.7);
  auto again = run_balanced_ablation(*b.bank, b.train_rows, b.test_rows, cfg);
  EXPECT_EQ(again[0].mean.auc, r[0].mean.auc);
  auto json = ablation_summary_json(r, cfg);
  EXPECT_NE(json.find("\"cells\""), std::string::npos);
}

TEST_F(SmallBench, UnbalancedReportCountsAndOverlapGuard) {
  auto& b = *bench_;
  UnbalancedConfig cfg;
  cfg.kind = FeatureKind::kHoc;
  auto rep = run_unbalanced_eval(*b.bank, b.train_rows, b.test_rows, cfg);
  std::size_t tp = 0;
  for (auto r : b.test_rows) tp += b.props[r].label == ProposalLabel::kAnimal;
  EXPECT_EQ(rep.test_positives, tp);
  EXPECT_EQ(rep.test_positives + rep.test_negatives, b.test_rows.size());
  EXPECT_EQ(rep.members + rep.dropped.size(), rep.train_positives);
  EXPECT_EQ(rep.train_ratio, class_ratio(rep.train_positives, rep.train_negatives));
  EXPECT_EQ(rep.scored.size(), b.test_rows.size());
  EXPECT_DOUBLE_EQ(rep.recall_at_precision, recall_at_precision(rep.pr, 0.10));
  std::vector<std::size_t> overlap = b.test_rows;
  overlap.push_back(b.train_rows.front());
  EXPECT_THROW(run_unbalanced_eval(*b.bank, b.train_rows, overlap, cfg), Error);
}

}  // namespace
}  // namespace savanna
