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

#ifndef SAVANNA_EXPERIMENTS_HPP_
#define SAVANNA_EXPERIMENTS_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "savanna/annotation_fusion.hpp"
#include "savanna/detector.hpp"
#include "savanna/features.hpp"
#include "savanna/metrics.hpp"
#include "savanna/proposals.hpp"
#include "savanna/raster.hpp"

namespace savanna {

/// Integer factor between a native and a coarser GSD; throws unless the
/// ratio is a whole number.
int resample_factor(double native_gsd_cm, double target_gsd_cm);

/// Proposals at the working resolution of cfg, labelled against the
/// ground truth (given at native resolution). Every image must share one
/// native GSD.
std::vector<Proposal> propose_and_label(std::span<RasterImage const> native,
                                        std::span<GroundTruthObject const> ground_truth,
                                        ProposalConfig const& cfg);

struct ImageSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded shuffle of image ids; the first round(train_fraction * n) train.
ImageSplit split_images(std::span<std::string const> image_ids,
                        double train_fraction, std::uint64_t seed);

/// Proposal rows whose image is in the given set, in proposal order.
std::vector<std::size_t> rows_in_images(std::span<Proposal const> proposals,
                                        std::span<std::string const> image_ids);

struct FeatureBankConfig {
  PatchSamplingConfig patches;
  KMeansConfig kmeans;
  /// Resolution the proposals were detected at.
  double working_gsd_cm = 8.0;
};

/// Lazily computed raw (unnormalized) descriptors of a fixed proposal set at
/// any GSD that is an integer multiple of the native one. Codebooks are
/// learnt from patches of the codebook images only. When those images
/// hold fewer ground-truth pixels than requested positive patches, every
/// available pixel is used and the rest of the budget goes to background.
class FeatureBank {
 public:
  FeatureBank(std::vector<RasterImage> native,
              std::vector<GroundTruthObject> ground_truth,
              std::vector<Proposal> proposals,
              std::vector<std::string> codebook_images, FeatureBankConfig cfg);
  ~FeatureBank();
  FeatureBank(FeatureBank&&) noexcept;
  FeatureBank& operator=(FeatureBank&&) noexcept;

  std::vector<Proposal> const& proposals() const { return proposals_; }
  std::vector<RasterImage> const& native_images() const { return native_; }

  FeatureMatrix const& hoc(double gsd_cm);
  FeatureMatrix const& bovw(double gsd_cm, int k);
  Codebook const& codebook(double gsd_cm, int k);
  /// Images resampled to the GSD (block means of the native pixels).
  std::vector<RasterImage> const& images_at(double gsd_cm);

  /// Seeds the caches with artifacts computed earlier (e.g. loaded from
  /// disk). Shapes are checked against the proposal set.
  void set_codebook(double gsd_cm, int k, Codebook codebook);
  void set_features(double gsd_cm, int k, FeatureMatrix features);

  /// Proposal centroid expressed at another GSD.
  Point2d centroid_at(std::size_t row, double gsd_cm) const;

 private:
  struct Cache;
  std::vector<RasterImage> native_;
  std::vector<GroundTruthObject> ground_truth_;
  std::vector<Proposal> proposals_;
  std::vector<std::string> codebook_images_;
  FeatureBankConfig cfg_;
  std::unique_ptr<Cache> cache_;
};

struct PreparedFeatures {
  Matrix train;
  Matrix test;
  std::string fingerprint;
};

/// z-scores fitted on the train rows only, then unit l2 rows. Combined
/// features normalize each block first, concatenate, and renormalize.
PreparedFeatures prepare_features(FeatureBank& bank, FeatureKind kind, int k,
                                  double gsd_cm,
                                  std::span<std::size_t const> train_rows,
                                  std::span<std::size_t const> test_rows);

struct AblationKey {
  FeatureKind kind = FeatureKind::kCombined;
  /// Ignored (stored as 0) for HOC.
  int k = 100;
  double gsd_cm = 8.0;
  friend auto operator<=>(AblationKey const&, AblationKey const&) = default;
};

std::string to_string(AblationKey const& key);

struct ExperimentConfig {
  std::vector<FeatureKind> kinds{FeatureKind::kCombined};
  std::vector<int> ks{100};
  std::vector<double> gsds_cm{8.0};
  int repeats = 5;
  bool balanced = true;
  std::uint64_t seed = 0;
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  int cv_folds = 5;

  void validate() const;
  /// Cartesian product of kinds x ks x gsds, HOC collapsed over k.
  std::vector<AblationKey> cells() const;
};

struct AblationResult {
  AblationKey key;
  std::vector<Curve> runs;
  std::vector<double> chosen_c;
  /// Vertical average of the runs on a 101-point FPR grid.
  Curve mean;
};

/// Balanced protocol: per cell, the same positives every repeat and a fresh
/// negative draw of equal size from the same images; one linear SVM with C
/// picked by stratified cross-validation; ROC on the test rows. Repeat r
/// uses identical draws across cells so cells compare paired.
std::vector<AblationResult> run_balanced_ablation(
    FeatureBank& bank, std::span<std::size_t const> train_rows,
    std::span<std::size_t const> test_rows, ExperimentConfig const& cfg);

struct UnbalancedConfig {
  FeatureKind kind = FeatureKind::kCombined;
  int k = 100;
  double gsd_cm = 8.0;
  EnsembleConfig ensemble;
  double precision_target = 0.10;
};

struct UnbalancedReport {
  std::size_t train_positives = 0;
  std::size_t train_negatives = 0;
  std::size_t test_positives = 0;
  std::size_t test_negatives = 0;
  /// "1:n" with n = round(negatives / positives).
  std::string train_ratio;
  std::string test_ratio;
  Curve pr;
  double recall_at_precision = 0.0;
  std::size_t members = 0;
  std::vector<DroppedExemplar> dropped;
  std::vector<ScoredExample> scored;
};

std::string class_ratio(std::size_t positives, std::size_t negatives);

/// Exemplar ensemble over the full train pools, scored on every test row.
/// Throws invalid-argument if an image contributes rows to both sides.
UnbalancedReport run_unbalanced_eval(FeatureBank& bank,
                                     std::span<std::size_t const> train_rows,
                                     std::span<std::size_t const> test_rows,
                                     UnbalancedConfig const& cfg);

/// Same protocol on explicit matrices (rows parallel to the proposal lists).
UnbalancedReport run_unbalanced_eval(FeatureMatrix const& train,
                                     std::span<Proposal const> train_props,
                                     FeatureMatrix const& test,
                                     std::span<Proposal const> test_props,
                                     UnbalancedConfig const& cfg);

/// Inclusive time-of-day range in seconds since midnight.
struct TimePeriod {
  std::string name;
  int start_second = 0;
  int end_second = 0;
};

/// Morning 09:13-09:28 and midday 13:08-13:30.
std::vector<TimePeriod> default_periods();

struct PeriodSplit {
  std::map<std::string, std::vector<std::string>> subsets;
  std::vector<std::string> unassigned;
};

/// Each image goes to the first period containing its timestamp.
PeriodSplit split_by_period(std::span<RasterImage const> images,
                            std::span<TimePeriod const> periods);

/// Subsamples each group to the size of the smallest one (seeded, order
/// preserved).
std::map<std::string, std::vector<std::size_t>> equalize_counts(
    std::map<std::string, std::vector<std::size_t>> groups, std::uint64_t seed);

/// {"cells": [{key, auc, auc_runs, chosen_c}], "seed", "repeats"}.
std::string ablation_summary_json(std::span<AblationResult const> results,
                                  ExperimentConfig const& cfg);

}  // namespace savanna

#endif  // SAVANNA_EXPERIMENTS_HPP_
