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

#include <cmath>
#include <numeric>

#include "bytes.hpp"
#include "savanna/detector.hpp"
#include "savanna/error.hpp"
#include "savanna/log.hpp"
#include "svm_internal.hpp"

namespace savanna {
namespace {

constexpr std::uint32_t kEnsembleVersion = 1;

LinearModel fit_exemplar(Matrix const& data, Eigen::Index exemplar_row,
                         std::span<Eigen::Index const> negative_rows,
                         ExemplarOptions const& opts) {
  if (negative_rows.empty()) throw_invalid("exemplar needs at least one negative");
  if (!(opts.c > 0) || !(opts.weight_ratio > 0)) {
    throw_invalid("exemplar C and weight ratio must be > 0");
  }
  double const n = static_cast<double>(negative_rows.size());
  ClassWeights weights{n * opts.weight_ratio, 1.0};
  LinearModel model;
  if (opts.weight_ratio >= 1.0) {
    model = detail::solve_singleton(data, exemplar_row, negative_rows, 1.0,
                                    opts.c * weights.positive, opts.c,
                                    opts.kkt_tol, opts.tol, opts.max_epochs,
                                    opts.seed);
  } else {
    Matrix x(static_cast<Eigen::Index>(negative_rows.size()) + 1, data.cols());
    std::vector<int> y{1};
    x.row(0) = data.row(exemplar_row);
    for (std::size_t k = 0; k < negative_rows.size(); ++k) {
      x.row(static_cast<Eigen::Index>(k) + 1) = data.row(negative_rows[k]);
      y.push_back(-1);
    }
    SvmOptions o{opts.c, weights, opts.tol, opts.kkt_tol, opts.max_epochs, opts.seed};
    model = train_linear_svm(x, y, o);
  }
  model.c_value = opts.c;
  model.positive_weight = weights.positive;
  model.negative_weight = weights.negative;
  return model;
}

}  // namespace

ExemplarModel calibrate(LinearModel model, Eigen::Ref<Vector const> const& exemplar,
                        std::string exemplar_id) {
  double raw = model.decision(exemplar);
  if (!(raw > 0.0) || !std::isfinite(raw)) {
    throw Error(ErrorCode::kCalibrationFailure,
                "exemplar does not score above zero on its own model",
                exemplar_id + " raw score " + std::to_string(raw));
  }
  ExemplarModel out;
  out.base = std::move(model);
  out.exemplar_id = std::move(exemplar_id);
  out.calibration_scale = 1.0 / raw;
  return out;
}

ExemplarModel train_exemplar(Matrix const& data, Eigen::Index exemplar_row,
                             std::span<Eigen::Index const> negative_rows,
                             std::string exemplar_id,
                             ExemplarOptions const& opts) {
  if (exemplar_row < 0 || exemplar_row >= data.rows()) {
    throw_invalid("exemplar row out of range");
  }
  for (auto r : negative_rows) {
    if (r < 0 || r >= data.rows() || r == exemplar_row) {
      throw_invalid("invalid negative row", std::to_string(r));
    }
  }
  auto model = fit_exemplar(data, exemplar_row, negative_rows, opts);
  return calibrate(std::move(model), data.row(exemplar_row).transpose(),
                   std::move(exemplar_id));
}

ExemplarModel train_exemplar(Eigen::Ref<Vector const> const& exemplar,
                             std::string exemplar_id, Matrix const& negatives,
                             ExemplarOptions const& opts) {
  if (exemplar.size() != negatives.cols()) {
    throw_invalid("exemplar and negatives differ in dimension");
  }
  Matrix data(negatives.rows() + 1, negatives.cols());
  data.row(0) = exemplar.transpose();
  data.bottomRows(negatives.rows()) = negatives;
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(negatives.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{1});
  return train_exemplar(data, 0, rows, std::move(exemplar_id), opts);
}

Matrix Ensemble::calibrated_weights() const {
  Matrix w(static_cast<Eigen::Index>(members.size()), dim);
  for (std::size_t m = 0; m < members.size(); ++m) {
    w.row(static_cast<Eigen::Index>(m)) =
        members[m].calibration_scale * members[m].base.w.transpose();
  }
  return w;
}

Vector Ensemble::calibrated_biases() const {
  Vector b(static_cast<Eigen::Index>(members.size()));
  for (std::size_t m = 0; m < members.size(); ++m) {
    b[static_cast<Eigen::Index>(m)] = members[m].calibration_scale * members[m].base.b;
  }
  return b;
}

EnsembleBuild build_ensemble(FeatureMatrix const& positives,
                             FeatureMatrix const& negatives,
                             EnsembleConfig const& cfg) {
  if (positives.rows() == 0) throw_invalid("no positives to build an ensemble from");
  if (negatives.rows() == 0) throw_invalid("no negatives to build an ensemble from");
  if (positives.values.cols() != negatives.values.cols()) {
    throw_invalid("positive and negative features differ in dimension");
  }
  auto const np = static_cast<Eigen::Index>(positives.rows());
  auto const nn = static_cast<Eigen::Index>(negatives.rows());
  Matrix data(np + nn, positives.values.cols());
  data.topRows(np) = positives.values;
  data.bottomRows(nn) = negatives.values;

  EnsembleBuild build;
  build.ensemble.fingerprint = cfg.fingerprint;
  build.ensemble.dim = static_cast<int>(data.cols());
  std::vector<Eigen::Index> rows;
  for (Eigen::Index p = 0; p < np; ++p) {
    rows.clear();
    if (cfg.other_positives_as_negatives) {
      for (Eigen::Index q = 0; q < np; ++q) {
        if (q != p) rows.push_back(q);
      }
    }
    for (Eigen::Index r = 0; r < nn; ++r) rows.push_back(np + r);
    auto const& id = positives.ids[static_cast<std::size_t>(p)];
    try {
      build.ensemble.members.push_back(train_exemplar(data, p, rows, id, cfg.exemplar));
    } catch (Error const& e) {
      if (e.code() != ErrorCode::kCalibrationFailure) throw;
      log_warning("dropping exemplar " + id + ": " + e.what());
      build.dropped.push_back({id, e.what()});
    }
  }
  if (build.ensemble.members.empty()) {
    throw Error(ErrorCode::kTrainingFailure, "every exemplar failed calibration",
                std::to_string(build.dropped.size()) + " dropped");
  }
  return build;
}

DetectionResult ensemble_predict(Ensemble const& ensemble,
                                 Eigen::Ref<Vector const> const& x,
                                 double threshold, std::string proposal_id) {
  if (ensemble.members.empty()) throw_invalid("ensemble has no members");
  if (x.size() != ensemble.dim) throw_invalid("feature dimension mismatch");
  DetectionResult r;
  r.proposal_id = std::move(proposal_id);
  r.max_score = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
    double s = ensemble.members[m].score(x);
    if (s > r.max_score) {
      r.max_score = s;
      r.best_member = m;
    }
  }
  r.best_exemplar_id = ensemble.members[r.best_member].exemplar_id;
  r.animal = r.max_score > threshold;
  return r;
}

std::vector<DetectionResult> ensemble_predict(Ensemble const& ensemble,
                                              FeatureMatrix const& x,
                                              double threshold) {
  if (ensemble.members.empty()) throw_invalid("ensemble has no members");
  if (x.values.cols() != ensemble.dim && x.rows() > 0) {
    throw_invalid("feature dimension mismatch");
  }
  Matrix scores = x.values * ensemble.calibrated_weights().transpose();
  scores.rowwise() += ensemble.calibrated_biases().transpose();
  std::vector<DetectionResult> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto& r = out[i];
    r.proposal_id = x.ids[i];
    Eigen::Index best = 0;
    auto row = scores.row(static_cast<Eigen::Index>(i));
    for (Eigen::Index m = 1; m < row.size(); ++m) {
      if (row[m] > row[best]) best = m;
    }
    r.best_member = static_cast<std::size_t>(best);
    r.max_score = row[best];
    r.best_exemplar_id = ensemble.members[r.best_member].exemplar_id;
    r.animal = r.max_score > threshold;
  }
  return out;
}

std::vector<std::uint8_t> encode_ensemble(Ensemble const& e) {
  using bytes::put_le;
  std::vector<std::uint8_t> out;
  put_le<std::uint32_t>(out, kEnsembleVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.members.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.dim));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.fingerprint.size()));
  out.insert(out.end(), e.fingerprint.begin(), e.fingerprint.end());
  for (auto const& m : e.members) {
    if (m.base.w.size() != e.dim) throw_invalid("member dimension mismatch");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.exemplar_id.size()));
    out.insert(out.end(), m.exemplar_id.begin(), m.exemplar_id.end());
    put_le<double>(out, m.calibration_scale);
    put_le<double>(out, m.base.b);
    for (Eigen::Index j = 0; j < m.base.w.size(); ++j) put_le<double>(out, m.base.w[j]);
  }
  return out;
}

Ensemble decode_ensemble(std::span<std::uint8_t const> data) {
  using bytes::get_le;
  std::size_t off = 0;
  auto read_string = [&](std::uint32_t len) {
    if (off + len > data.size()) throw_invalid("truncated ensemble file");
    std::string s(reinterpret_cast<char const*>(data.data()) + off, len);
    off += len;
    return s;
  };
  auto version = get_le<std::uint32_t>(data, off);
  if (version != kEnsembleVersion) {
    throw_invalid("unsupported ensemble version", std::to_string(version));
  }
  Ensemble e;
  auto count = get_le<std::uint32_t>(data, off);
  e.dim = static_cast<int>(get_le<std::uint32_t>(data, off));
  e.fingerprint = read_string(get_le<std::uint32_t>(data, off));
  for (std::uint32_t m = 0; m < count; ++m) {
    ExemplarModel member;
    member.exemplar_id = read_string(get_le<std::uint32_t>(data, off));
    member.calibration_scale = get_le<double>(data, off);
    member.base.b = get_le<double>(data, off);
    member.base.w.resize(e.dim);
    for (int j = 0; j < e.dim; ++j) member.base.w[j] = get_le<double>(data, off);
    e.members.push_back(std::move(member));
  }
  if (off != data.size()) throw_invalid("trailing bytes in ensemble file");
  return e;
}

void save_ensemble(std::filesystem::path const& path, Ensemble const& ensemble) {
  bytes::write_all(path, encode_ensemble(ensemble));
}

Ensemble load_ensemble(std::filesystem::path const& path) {
  return decode_ensemble(bytes::read_all(path));
}

}  // namespace savanna
