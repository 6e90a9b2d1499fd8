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

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "savanna/detector.hpp"
#include "savanna/error.hpp"
#include "savanna/log.hpp"

namespace savanna {
namespace {

struct Problem {
  Matrix x;
  std::vector<int> y;
};

Problem blobs(int n, int d, double sep, std::uint64_t seed, double pos_frac = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Problem p{Matrix(n, d), std::vector<int>(static_cast<std::size_t>(n))};
  int n_pos = std::max(1, static_cast<int>(std::lround(n * pos_frac)));
  for (int i = 0; i < n; ++i) {
    p.y[i] = i < n_pos ? 1 : -1;
    for (int j = 0; j < d; ++j) p.x(i, j) = g(rng) + (j == 0 ? p.y[i] * sep / 2 : 0.0);
  }
  return p;
}

TEST(Svm, TwoPointsAnalytic) {
  // Separable pair at +-1 on a line: hard-margin solution w = 1, b = 0,
  // reached once C is large enough that neither slack pays off.
  Matrix x(2, 1);
  x << 1, -1;
  std::vector<int> y{1, -1};
  auto m = train_linear_svm(x, y, {.c = 10.0});
  EXPECT_NEAR(m.w[0], 1.0, 1e-6);
  EXPECT_NEAR(m.b, 0.0, 1e-6);
  // With C = 0.25 the dual box binds: alpha = C, w = 2C = 0.5.
  auto soft = train_linear_svm(x, y, {.c = 0.25});
  EXPECT_NEAR(soft.w[0], 0.5, 1e-6);
  EXPECT_NEAR(svm_objective(soft, x, y), 0.125 + 0.25 * 2 * 0.5, 1e-6);
}

TEST(Svm, MatchesGridSearchOnSmallProblems) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    int d = 1 + static_cast<int>(seed % 2);
    auto p = blobs(8 + static_cast<int>(seed) * 2, d, 1.0, seed);
    for (double c : {0.1, 1.0, 10.0}) {
      ClassWeights w{1.0 + static_cast<double>(seed % 3), 1.0};
      auto m = train_linear_svm(p.x, p.y, {.c = c, .weights = w, .tol = 1e-10, .kkt_tol = 1e-9});
      auto brute = oracle::svm_grid_search(p.x, p.y, c, w);
      double obj = oracle::svm_primal(m.w, m.b, p.x, p.y, c, w);
      EXPECT_LE(obj, brute.objective * (1 + 1e-3)) << "seed " << seed << " c " << c;
      EXPECT_GE(obj, brute.objective * (1 - 1e-3) - 1e-9) << "seed " << seed << " c " << c;
      EXPECT_NEAR(svm_objective(m, p.x, p.y), obj, 1e-9 * std::max(1.0, obj));
    }
  }
}

TEST(Svm, DuplicatedDataWithHalfCIsTheSameProblem) {
  auto p = blobs(20, 3, 1.5, 4);
  Matrix x2(40, 3);
  x2 << p.x, p.x;
  std::vector<int> y2 = p.y;
  y2.insert(y2.end(), p.y.begin(), p.y.end());
  SvmOptions o{.c = 2.0, .tol = 1e-12, .kkt_tol = 1e-10};
  auto a = train_linear_svm(p.x, p.y, o);
  o.c = 1.0;
  auto b = train_linear_svm(x2, y2, o);
  EXPECT_LT((a.w - b.w).norm(), 1e-5);
  EXPECT_NEAR(a.b, b.b, 1e-5);
}

TEST(Svm, RejectsBadInput) {
  auto p = blobs(6, 2, 1.0, 1);
  std::vector<int> all_pos(6, 1);
  EXPECT_THROW(train_linear_svm(p.x, all_pos, {}), Error);
  std::vector<int> bad = p.y;
  bad[0] = 0;
  EXPECT_THROW(train_linear_svm(p.x, bad, {}), Error);
  EXPECT_THROW(train_linear_svm(p.x, p.y, {.c = 0.0}), Error);
  std::vector<int> short_y(3, 1);
  EXPECT_THROW(train_linear_svm(p.x, short_y, {}), Error);
}

TEST(Svm, OptimalBiasMinimizesPrimal) {
  auto p = blobs(15, 2, 1.0, 9);
  Vector w(2);
  w << 0.7, -0.2;
  ClassWeights cw{2.0, 1.0};
  double b = optimal_bias(w, p.x, p.y, 1.0, cw);
  double at = oracle::svm_primal(w, b, p.x, p.y, 1.0, cw);
  for (double delta = -1.0; delta <= 1.0; delta += 0.01) {
    EXPECT_LE(at, oracle::svm_primal(w, b + delta, p.x, p.y, 1.0, cw) + 1e-12);
  }
}

TEST(CrossValidation, SeparableTiesPickSmallestC) {
  auto p = blobs(40, 2, 12.0, 2);
  std::vector<double> grid{0.01, 0.1, 1.0, 10.0};
  auto cv = cross_validate_c(p.x, p.y, grid, {}, 5, 3);
  ASSERT_EQ(cv.mean_accuracy.size(), grid.size());
  for (double a : cv.mean_accuracy) EXPECT_DOUBLE_EQ(a, 1.0);
  EXPECT_DOUBLE_EQ(cv.best_c, 0.01);
  auto again = cross_validate_c(p.x, p.y, grid, {}, 5, 3);
  EXPECT_EQ(again.mean_accuracy, cv.mean_accuracy);
  EXPECT_THROW(cross_validate_c(p.x, p.y, {}, {}, 5, 3), Error);
}

TEST(CrossValidation, BestIsArgmaxOfMeanAccuracy) {
  auto p = blobs(60, 3, 1.2, 5);
  std::vector<double> grid{1e-4, 0.01, 1.0, 100.0};
  auto cv = cross_validate_c(p.x, p.y, grid, {}, 4, 1);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (cv.mean_accuracy[i] > cv.mean_accuracy[best]) best = i;
  }
  EXPECT_DOUBLE_EQ(cv.best_c, grid[best]);
}

TEST(Exemplar, OwnScoreIsExactlyOne) {
  auto p = blobs(41, 5, 2.0, 7, 1.0 / 41);
  Vector ex = p.x.row(0).transpose();
  Matrix negs = p.x.bottomRows(40);
  auto m = train_exemplar(ex, "ex", negs, {});
  EXPECT_NEAR(m.score(ex), 1.0, 1e-9);
  EXPECT_NEAR(m.raw_score(ex) * m.calibration_scale, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.base.positive_weight, 40.0);
  EXPECT_EQ(m.exemplar_id, "ex");
}

TEST(Exemplar, MatchesGeneralSolverOnSmallProblem) {
  auto p = blobs(12, 2, 1.0, 3, 1.0 / 12);
  Vector ex = p.x.row(0).transpose();
  Matrix negs = p.x.bottomRows(11);
  ExemplarOptions eo{.c = 0.5, .kkt_tol = 1e-9, .tol = 1e-12, .max_epochs = 100000};
  auto m = train_exemplar(ex, "ex", negs, eo);
  auto brute = oracle::svm_grid_search(p.x, p.y, 0.5, {11.0, 1.0});
  double obj = oracle::svm_primal(m.base.w, m.base.b, p.x, p.y, 0.5, {11.0, 1.0});
  EXPECT_NEAR(obj, brute.objective, 1e-3 * brute.objective);
}

TEST(Calibrate, ScaleIsReciprocalOfRawScore) {
  LinearModel lm;
  lm.w = Vector::Constant(2, 1.0);
  lm.b = 0.5;
  Vector ex(2);
  ex << 1.0, 1.0;  // raw 2.5
  auto m = calibrate(lm, ex, "e");
  EXPECT_DOUBLE_EQ(m.calibration_scale, 0.4);
  EXPECT_NEAR(m.score(ex), 1.0, 1e-15);
  ex << -1.0, 0.0;
  try {
    calibrate(lm, ex, "e");
    FAIL();
  } catch (Error const& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCalibrationFailure);
  }
}

FeatureMatrix rows_of(Matrix m, std::string prefix) {
  FeatureMatrix f;
  f.values = std::move(m);
  for (Eigen::Index i = 0; i < f.values.rows(); ++i) f.ids.push_back(prefix + std::to_string(i));
  return f;
}

TEST(Ensemble, OtherPositivesJoinTheNegatives) {
  auto p = blobs(12, 3, 3.0, 11, 2.0 / 12);
  auto pos = rows_of(p.x.topRows(2), "pos");
  auto neg = rows_of(p.x.bottomRows(10), "neg");
  auto build = build_ensemble(pos, neg, {});
  ASSERT_EQ(build.ensemble.members.size(), 2u);
  Matrix eleven(11, 3);
  eleven << p.x.row(1), p.x.bottomRows(10);
  auto direct = train_exemplar(p.x.row(0).transpose(), "pos0", eleven, {});
  auto const& m0 = build.ensemble.members[0];
  EXPECT_DOUBLE_EQ(m0.base.positive_weight, 11.0);
  EXPECT_LT((m0.base.w - direct.base.w).norm(), 1e-9);
  EXPECT_EQ(m0.exemplar_id, "pos0");
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(build.ensemble.members[i].score(pos.values.row(i).transpose()), 1.0, 1e-9);
  }
  EnsembleConfig only_neg;
  only_neg.other_positives_as_negatives = false;
  EXPECT_DOUBLE_EQ(build_ensemble(pos, neg, only_neg).ensemble.members[0].base.positive_weight, 10.0);
}

TEST(Ensemble, UncalibratableExemplarsAreDropped) {
  // At half the negatives' total weight, an exemplar sitting on the
  // negatives loses the bias tug of war and scores -1.
  Matrix pos(2, 1), neg(3, 1);
  pos << 5.0, 0.0;
  neg << 0.0, 0.0, 0.0;
  EnsembleConfig cfg;
  cfg.exemplar.weight_ratio = 0.5;
  cfg.other_positives_as_negatives = false;
  ScopedLogCapture cap;
  auto build = build_ensemble(rows_of(pos, "p"), rows_of(neg, "n"), cfg);
  ASSERT_EQ(build.ensemble.members.size(), 1u);
  EXPECT_EQ(build.ensemble.members[0].exemplar_id, "p0");
  ASSERT_EQ(build.dropped.size(), 1u);
  EXPECT_EQ(build.dropped[0].exemplar_id, "p1");
  EXPECT_FALSE(cap.warnings().empty());
  Matrix lone(1, 1);
  lone << 0.0;
  try {
    build_ensemble(rows_of(lone, "p"), rows_of(neg, "n"), cfg);
    FAIL();
  } catch (Error const& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTrainingFailure);
  }
}

Ensemble two_members() {
  Ensemble e;
  e.dim = 2;
  for (int i = 0; i < 2; ++i) {
    ExemplarModel m;
    m.exemplar_id = "e" + std::to_string(i);
    m.base.w = Vector::Zero(2);
    m.base.w[i] = 1.0;
    m.base.b = -0.5;
    m.calibration_scale = 2.0;
    e.members.push_back(m);
  }
  return e;
}

TEST(Predict, MaxOverMembersWithStrictThreshold) {
  auto e = two_members();
  Vector x(2);
  x << 0.2, 1.0;  // scores -0.6, 1.0
  auto r = ensemble_predict(e, x, 0.0, "q");
  EXPECT_DOUBLE_EQ(r.max_score, 1.0);
  EXPECT_EQ(r.best_exemplar_id, "e1");
  EXPECT_TRUE(r.animal);
  EXPECT_FALSE(ensemble_predict(e, x, 1.0).animal);
  x << 0.75, 0.75;  // tie goes to the first member
  EXPECT_EQ(ensemble_predict(e, x).best_member, 0u);
  FeatureMatrix fm = rows_of(Matrix(2, 2), "r");
  fm.values << 0.2, 1.0, 0.75, 0.75;
  auto batch = ensemble_predict(e, fm, 0.0);
  EXPECT_DOUBLE_EQ(batch[0].max_score, 1.0);
  EXPECT_EQ(batch[1].best_member, 0u);
  EXPECT_EQ(batch[0].proposal_id, "r0");
  Vector wrong(3);
  EXPECT_THROW(ensemble_predict(e, wrong), Error);
  EXPECT_THROW(ensemble_predict(Ensemble{}, x), Error);
}

TEST(EnsembleIo, RoundTripIsExact) {
  auto e = two_members();
  e.fingerprint = "hoc|gsd8";
  fixtures::TempDir dir;
  save_ensemble(dir.path() / "model.bin", e);
  auto back = load_ensemble(dir.path() / "model.bin");
  EXPECT_EQ(back.fingerprint, e.fingerprint);
  ASSERT_EQ(back.members.size(), 2u);
  EXPECT_EQ(back.members[1].base.w, e.members[1].base.w);
  EXPECT_EQ(back.calibrated_weights(), e.calibrated_weights());
  EXPECT_EQ(back.calibrated_biases(), e.calibrated_biases());
  auto bytes = encode_ensemble(e);
  bytes.pop_back();
  EXPECT_THROW(decode_ensemble(bytes), Error);
}

}  // namespace
}  // namespace savanna
