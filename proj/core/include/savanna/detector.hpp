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

#ifndef SAVANNA_DETECTOR_HPP_
#define SAVANNA_DETECTOR_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "savanna/features.hpp"
#include "savanna/linalg.hpp"

namespace savanna {

struct ClassWeights {
  double positive = 1.0;
  double negative = 1.0;
};

struct SvmOptions {
  double c = 1.0;
  ClassWeights weights;
  /// Stop once a full sweep changes the dual objective by less than this
  /// fraction.
  double tol = 1e-6;
  /// Stop once the maximal KKT violation drops below this.
  double kkt_tol = 1e-4;
  int max_epochs = 2000;
  std::uint64_t seed = 0;
};

/// Decision function w.x + b. Labels are +1 (animal) / -1 (background).
struct LinearModel {
  Vector w;
  double b = 0.0;
  double c_value = 1.0;
  double positive_weight = 1.0;
  double negative_weight = 1.0;
  int epochs = 0;

  double decision(Eigen::Ref<Vector const> const& x) const {
    return w.dot(x) + b;
  }
};

/// 1/2 ||w||^2 + C sum_i weight(y_i) max(0, 1 - y_i (w.x_i + b)).
double svm_objective(LinearModel const& model, Matrix const& x,
                     std::span<int const> y);

/// Soft-margin linear SVM with an unregularized bias. Problems with a
/// single example of one class whose loss weight dominates the other class
/// (the exemplar setting) use an exact reduction to a box-constrained dual
/// solved by coordinate descent; everything else goes through SMO with
/// second-order working-set selection.
LinearModel train_linear_svm(Matrix const& x, std::span<int const> y,
                             SvmOptions const& opts);

/// Bias minimizing the primal objective for fixed w.
double optimal_bias(Vector const& w, Matrix const& x, std::span<int const> y,
                    double c, ClassWeights weights);

struct CrossValidationResult {
  double best_c = 0.0;
  std::vector<double> mean_accuracy;  // parallel to the grid
};

/// Stratified k-fold selection of C by mean fold accuracy; ties go to the
/// smallest C.
CrossValidationResult cross_validate_c(Matrix const& x, std::span<int const> y,
                                       std::span<double const> grid,
                                       SvmOptions const& base, int folds = 5,
                                       std::uint64_t seed = 0);

struct ExemplarOptions {
  double c = 1.0;
  /// Positive loss weight is |negatives| * weight_ratio.
  double weight_ratio = 1.0;
  double kkt_tol = 1e-3;
  double tol = 1e-6;
  int max_epochs = 500;
  std::uint64_t seed = 0;
};

/// One positive against many negatives, rescaled so the exemplar itself
/// scores exactly one.
struct ExemplarModel {
  LinearModel base;
  std::string exemplar_id;
  double calibration_scale = 1.0;

  double raw_score(Eigen::Ref<Vector const> const& x) const {
    return base.decision(x);
  }
  double score(Eigen::Ref<Vector const> const& x) const {
    return calibration_scale * base.decision(x);
  }
};

/// Throws kCalibrationFailure if the trained model does not score its own
/// exemplar above zero.
ExemplarModel train_exemplar(Eigen::Ref<Vector const> const& exemplar,
                             std::string exemplar_id, Matrix const& negatives,
                             ExemplarOptions const& opts);

/// Same, with the exemplar and its negatives given as rows of one matrix.
ExemplarModel train_exemplar(Matrix const& data, Eigen::Index exemplar_row,
                             std::span<Eigen::Index const> negative_rows,
                             std::string exemplar_id,
                             ExemplarOptions const& opts);

/// scale = 1 / raw exemplar score.
ExemplarModel calibrate(LinearModel model, Eigen::Ref<Vector const> const& exemplar,
                        std::string exemplar_id);

struct Ensemble {
  std::vector<ExemplarModel> members;
  std::string fingerprint;
  int dim = 0;

  /// Calibrated member weights stacked row-wise, and calibrated biases.
  Matrix calibrated_weights() const;
  Vector calibrated_biases() const;
};

struct EnsembleConfig {
  ExemplarOptions exemplar;
  bool other_positives_as_negatives = true;
  std::string fingerprint;
};

struct DroppedExemplar {
  std::string exemplar_id;
  std::string reason;
};

struct EnsembleBuild {
  Ensemble ensemble;
  std::vector<DroppedExemplar> dropped;
};

/// One calibrated member per positive. Members whose calibration fails are
/// dropped and reported; zero survivors throws kTrainingFailure.
EnsembleBuild build_ensemble(FeatureMatrix const& positives,
                             FeatureMatrix const& negatives,
                             EnsembleConfig const& cfg);

struct DetectionResult {
  std::string proposal_id;
  double max_score = 0.0;
  std::string best_exemplar_id;
  std::size_t best_member = 0;
  bool animal = false;
};

/// Max calibrated score over members; animal iff it exceeds threshold.
DetectionResult ensemble_predict(Ensemble const& ensemble,
                                 Eigen::Ref<Vector const> const& x,
                                 double threshold = 0.0,
                                 std::string proposal_id = {});
std::vector<DetectionResult> ensemble_predict(Ensemble const& ensemble,
                                              FeatureMatrix const& x,
                                              double threshold = 0.0);

/// Header: u32 version, u32 member count, u32 dim, u32 fingerprint length,
/// fingerprint bytes. Per member: u32 id length, id bytes, f64
/// calibration_scale, f64 b, dim x f64 w. Little-endian throughout.
std::vector<std::uint8_t> encode_ensemble(Ensemble const& ensemble);
Ensemble decode_ensemble(std::span<std::uint8_t const> bytes);
void save_ensemble(std::filesystem::path const& path, Ensemble const& ensemble);
Ensemble load_ensemble(std::filesystem::path const& path);

}  // namespace savanna

#endif  // SAVANNA_DETECTOR_HPP_
