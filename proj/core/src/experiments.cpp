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

#include "savanna/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "savanna/error.hpp"
#include "savanna/log.hpp"

namespace savanna {

int resample_factor(double native_gsd_cm, double target_gsd_cm) {
  if (!(native_gsd_cm > 0) || !(target_gsd_cm > 0)) throw_invalid("GSD must be > 0");
  double ratio = target_gsd_cm / native_gsd_cm;
  long f = std::lround(ratio);
  if (f < 1 || std::abs(ratio - static_cast<double>(f)) > 1e-9) {
    throw_invalid("target GSD must be an integer multiple of the native GSD",
                  std::to_string(target_gsd_cm) + " vs " + std::to_string(native_gsd_cm));
  }
  return static_cast<int>(f);
}

namespace {

double common_gsd(std::span<RasterImage const> images) {
  if (images.empty()) throw_invalid("no images");
  double g = images.front().gsd_cm();
  for (auto const& img : images) {
    if (std::abs(img.gsd_cm() - g) > 1e-9) {
      throw_invalid("images differ in native GSD", img.id());
    }
  }
  return g;
}

std::map<std::string, std::vector<GroundTruthObject const*>> by_image(
    std::span<GroundTruthObject const> gt) {
  std::map<std::string, std::vector<GroundTruthObject const*>> out;
  for (auto const& g : gt) out[g.image_id].push_back(&g);
  return out;
}

GroundTruthObject rescaled(GroundTruthObject const& g, int factor) {
  GroundTruthObject out = g;
  if (factor != 1) {
    out.pixels = downscale_pixels(g.pixels, factor);
    out.centroid = from_native(g.centroid, factor);
  }
  return out;
}

}  // namespace

std::vector<Proposal> propose_and_label(std::span<RasterImage const> native,
                                        std::span<GroundTruthObject const> ground_truth,
                                        ProposalConfig const& cfg) {
  cfg.validate();
  int const factor = resample_factor(common_gsd(native), cfg.working_gsd_cm);
  auto gt = by_image(ground_truth);
  std::vector<Proposal> all;
  for (auto const& img : native) {
    auto props = factor == 1 ? generate_proposals(img, cfg)
                             : generate_proposals(downsample(img, factor), cfg);
    std::vector<GroundTruthObject> local;
    if (auto it = gt.find(img.id()); it != gt.end()) {
      for (auto const* g : it->second) local.push_back(rescaled(*g, factor));
    }
    label_proposals(props, local, cfg);
    for (auto& p : props) all.push_back(std::move(p));
  }
  return all;
}

ImageSplit split_images(std::span<std::string const> image_ids,
                        double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw_invalid("train fraction must be in (0, 1)");
  }
  std::vector<std::string> ids(image_ids.begin(), image_ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(ids.size())));
  if (n_train == 0 || n_train == ids.size()) throw_invalid("split leaves one side empty");
  ImageSplit s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<std::size_t> rows_in_images(std::span<Proposal const> proposals,
                                        std::span<std::string const> image_ids) {
  std::set<std::string> wanted(image_ids.begin(), image_ids.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (wanted.contains(proposals[i].image_id)) rows.push_back(i);
  }
  return rows;
}

// FeatureBank ----------------------------------------------------------------

struct FeatureBank::Cache {
  double native_gsd = 0.0;
  std::map<std::string, std::size_t> image_index;
  std::map<int, std::vector<RasterImage>> images;
  std::map<int, FeatureMatrix> hoc;
  std::map<std::pair<int, int>, Codebook> codebooks;
  std::map<std::pair<int, int>, FeatureMatrix> bovw;
};

FeatureBank::FeatureBank(std::vector<RasterImage> native,
                         std::vector<GroundTruthObject> ground_truth,
                         std::vector<Proposal> proposals,
                         std::vector<std::string> codebook_images,
                         FeatureBankConfig cfg)
    : native_(std::move(native)),
      ground_truth_(std::move(ground_truth)),
      proposals_(std::move(proposals)),
      codebook_images_(std::move(codebook_images)),
      cfg_(cfg),
      cache_(std::make_unique<Cache>()) {
  cache_->native_gsd = common_gsd(native_);
  resample_factor(cache_->native_gsd, cfg_.working_gsd_cm);
  for (std::size_t i = 0; i < native_.size(); ++i) {
    if (!cache_->image_index.emplace(native_[i].id(), i).second) {
      throw_invalid("duplicate image id", native_[i].id());
    }
  }
  for (auto const& p : proposals_) {
    if (!cache_->image_index.contains(p.image_id)) {
      throw_invalid("proposal refers to an unknown image", p.proposal_id);
    }
  }
  for (auto const& id : codebook_images_) {
    if (!cache_->image_index.contains(id)) throw_invalid("unknown codebook image", id);
  }
  if (codebook_images_.empty()) throw_invalid("codebook needs at least one image");
}

FeatureBank::~FeatureBank() = default;
FeatureBank::FeatureBank(FeatureBank&&) noexcept = default;
FeatureBank& FeatureBank::operator=(FeatureBank&&) noexcept = default;

std::vector<RasterImage> const& FeatureBank::images_at(double gsd_cm) {
  int f = resample_factor(cache_->native_gsd, gsd_cm);
  auto it = cache_->images.find(f);
  if (it != cache_->images.end()) return it->second;
  std::vector<RasterImage> out;
  out.reserve(native_.size());
  for (auto const& img : native_) out.push_back(f == 1 ? img : downsample(img, f));
  return cache_->images.emplace(f, std::move(out)).first->second;
}

Point2d FeatureBank::centroid_at(std::size_t row, double gsd_cm) const {
  int fw = resample_factor(cache_->native_gsd, cfg_.working_gsd_cm);
  int ft = resample_factor(cache_->native_gsd, gsd_cm);
  auto const& p = proposals_.at(row);
  auto const& img = native_[cache_->image_index.at(p.image_id)];
  Point2d q = from_native(to_native(p.centroid, fw), ft);
  int w = (img.width() + ft - 1) / ft, h = (img.height() + ft - 1) / ft;
  return {std::clamp(q.x, 0.0, w - 1.0), std::clamp(q.y, 0.0, h - 1.0)};
}

FeatureMatrix const& FeatureBank::hoc(double gsd_cm) {
  int f = resample_factor(cache_->native_gsd, gsd_cm);
  if (auto it = cache_->hoc.find(f); it != cache_->hoc.end()) return it->second;
  auto const& images = images_at(gsd_cm);
  FeatureMatrix m;
  m.kind = FeatureKind::kHoc;
  m.values.resize(static_cast<Eigen::Index>(proposals_.size()), 3 * kHocBins);
  for (std::size_t i = 0; i < proposals_.size(); ++i) {
    auto const& img = images[cache_->image_index.at(proposals_[i].image_id)];
    auto v = extract_hoc(img, centroid_at(i, gsd_cm), proposals_[i].proposal_id);
    m.ids.push_back(v.proposal_id);
    m.values.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<Vector const>(v.values.data(), static_cast<Eigen::Index>(v.values.size()));
  }
  return cache_->hoc.emplace(f, std::move(m)).first->second;
}

Codebook const& FeatureBank::codebook(double gsd_cm, int k) {
  int f = resample_factor(cache_->native_gsd, gsd_cm);
  auto key = std::make_pair(f, k);
  if (auto it = cache_->codebooks.find(key); it != cache_->codebooks.end()) return it->second;
  auto const& all = images_at(gsd_cm);
  auto gt = by_image(ground_truth_);
  std::vector<RasterImage> images;
  std::vector<std::vector<PixelCoord>> positives;
  std::size_t available = 0;
  for (auto const& id : codebook_images_) {
    images.push_back(all[cache_->image_index.at(id)]);
    std::vector<PixelCoord> px;
    if (auto it = gt.find(id); it != gt.end()) {
      for (auto const* g : it->second) {
        if (g->verified == Verification::kRejected) continue;
        auto scaled = f == 1 ? g->pixels : downscale_pixels(g->pixels, f);
        px.insert(px.end(), scaled.begin(), scaled.end());
      }
    }
    std::sort(px.begin(), px.end());
    px.erase(std::unique(px.begin(), px.end()), px.end());
    available += px.size();
    positives.push_back(std::move(px));
  }
  PatchSamplingConfig pc = cfg_.patches;
  if (static_cast<std::size_t>(pc.n_positive) > available) {
    log_info("codebook at " + std::to_string(gsd_cm) + " cm: only " +
             std::to_string(available) + " animal pixels, using all of them");
    pc.n_positive = static_cast<int>(available);
  }
  auto patches = sample_patches(images, positives, pc);
  KMeansConfig kc = cfg_.kmeans;
  kc.k = k;
  auto cb = train_codebook(patches.patches, kc);
  return cache_->codebooks.emplace(key, std::move(cb)).first->second;
}

FeatureMatrix const& FeatureBank::bovw(double gsd_cm, int k) {
  int f = resample_factor(cache_->native_gsd, gsd_cm);
  auto key = std::make_pair(f, k);
  if (auto it = cache_->bovw.find(key); it != cache_->bovw.end()) return it->second;
  auto const& cb = codebook(gsd_cm, k);
  auto const& images = images_at(gsd_cm);
  auto maps = assign_words(images, cb);
  FeatureMatrix m;
  m.kind = FeatureKind::kBovw;
  m.values.resize(static_cast<Eigen::Index>(proposals_.size()), k);
  for (std::size_t i = 0; i < proposals_.size(); ++i) {
    auto const& wm = maps[cache_->image_index.at(proposals_[i].image_id)];
    auto v = extract_bovw(wm, centroid_at(i, gsd_cm), proposals_[i].proposal_id);
    m.ids.push_back(v.proposal_id);
    m.values.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<Vector const>(v.values.data(), static_cast<Eigen::Index>(v.values.size()));
  }
  return cache_->bovw.emplace(key, std::move(m)).first->second;
}

void FeatureBank::set_codebook(double gsd_cm, int k, Codebook codebook) {
  int f = resample_factor(cache_->native_gsd, gsd_cm);
  if (codebook.k != k || codebook.dim != 3 * kWindow * kWindow) {
    throw_invalid("codebook shape does not match", std::to_string(codebook.k));
  }
  cache_->codebooks[{f, k}] = std::move(codebook);
}

void FeatureBank::set_features(double gsd_cm, int k, FeatureMatrix features) {
  int f = resample_factor(cache_->native_gsd, gsd_cm);
  if (features.rows() != proposals_.size()) throw_invalid("feature rows do not match proposals");
  for (std::size_t i = 0; i < proposals_.size(); ++i) {
    if (features.ids[i] != proposals_[i].proposal_id) {
      throw_invalid("feature ids do not match proposals", features.ids[i]);
    }
  }
  if (features.kind == FeatureKind::kHoc) {
    cache_->hoc[f] = std::move(features);
  } else if (features.kind == FeatureKind::kBovw) {
    if (features.values.cols() != k) throw_invalid("BoVW width does not match k");
    cache_->bovw[{f, k}] = std::move(features);
  } else {
    throw_invalid("only raw HOC or BoVW features can be cached");
  }
}

namespace {

Matrix take_rows(Matrix const& m, std::span<std::size_t const> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::pair<Matrix, Matrix> normalized_pair(Matrix const& all,
                                          std::span<std::size_t const> train_rows,
                                          std::span<std::size_t const> test_rows) {
  Matrix train = take_rows(all, train_rows);
  auto stats = fit_normalization(train);
  return {apply_normalization(stats, std::move(train)),
          apply_normalization(stats, take_rows(all, test_rows))};
}

}  // namespace

PreparedFeatures prepare_features(FeatureBank& bank, FeatureKind kind, int k,
                                  double gsd_cm,
                                  std::span<std::size_t const> train_rows,
                                  std::span<std::size_t const> test_rows) {
  if (train_rows.empty()) throw_invalid("no training rows");
  PreparedFeatures out;
  std::ostringstream fp;
  fp << "kind=" << to_string(kind) << ";gsd=" << gsd_cm;
  if (kind != FeatureKind::kHoc) fp << ";k=" << k;
  fp << ";norm=train" << train_rows.size();
  out.fingerprint = fp.str();
  if (kind == FeatureKind::kHoc) {
    std::tie(out.train, out.test) = normalized_pair(bank.hoc(gsd_cm).values, train_rows, test_rows);
  } else if (kind == FeatureKind::kBovw) {
    std::tie(out.train, out.test) = normalized_pair(bank.bovw(gsd_cm, k).values, train_rows, test_rows);
  } else {
    auto [htr, hte] = normalized_pair(bank.hoc(gsd_cm).values, train_rows, test_rows);
    auto [btr, bte] = normalized_pair(bank.bovw(gsd_cm, k).values, train_rows, test_rows);
    out.train = combine_rows(htr, btr);
    out.test = combine_rows(hte, bte);
  }
  return out;
}

// Balanced ablation -------------------------------------------------------------

std::string to_string(AblationKey const& key) {
  std::ostringstream s;
  s << to_string(key.kind) << "/gsd" << key.gsd_cm;
  if (key.kind != FeatureKind::kHoc) s << "/k" << key.k;
  return s.str();
}

void ExperimentConfig::validate() const {
  if (kinds.empty()) throw_invalid("experiment needs at least one feature kind");
  if (ks.empty() || gsds_cm.empty()) throw_invalid("experiment needs k and GSD values");
  if (repeats < 1) throw_invalid("repeats must be >= 1");
  if (c_grid.empty()) throw_invalid("C grid is empty");
  if (cv_folds < 2) throw_invalid("need at least two folds");
  for (int k : ks) {
    if (k < 1) throw_invalid("k must be >= 1");
  }
}

std::vector<AblationKey> ExperimentConfig::cells() const {
  std::vector<AblationKey> out;
  for (auto kind : kinds) {
    for (double gsd : gsds_cm) {
      for (int k : ks) {
        AblationKey key{kind, kind == FeatureKind::kHoc ? 0 : k, gsd};
        if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
      }
    }
  }
  return out;
}

namespace {

void split_labels(std::span<Proposal const> props, std::span<std::size_t const> rows,
                  std::vector<std::size_t>& pos, std::vector<std::size_t>& neg) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto label = props[rows[i]].label;
    if (label == ProposalLabel::kAnimal) {
      pos.push_back(i);
    } else if (label == ProposalLabel::kBackground) {
      neg.push_back(i);
    }
  }
}

std::vector<std::size_t> draw(std::vector<std::size_t> pool, std::size_t n,
                              std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

void check_disjoint(std::span<Proposal const> props, std::span<std::size_t const> train_rows,
                    std::span<std::size_t const> test_rows) {
  std::set<std::string> train_images;
  for (auto r : train_rows) train_images.insert(props[r].image_id);
  for (auto r : test_rows) {
    if (train_images.contains(props[r].image_id)) {
      throw_invalid("image contributes to both train and test sets", props[r].image_id);
    }
  }
}

}  // namespace

std::vector<AblationResult> run_balanced_ablation(
    FeatureBank& bank, std::span<std::size_t const> train_rows,
    std::span<std::size_t const> test_rows, ExperimentConfig const& cfg) {
  cfg.validate();
  auto const& props = bank.proposals();
  check_disjoint(props, train_rows, test_rows);
  std::vector<std::size_t> train_pos, train_neg, test_pos, test_neg;
  split_labels(props, train_rows, train_pos, train_neg);
  split_labels(props, test_rows, test_pos, test_neg);
  if (train_pos.empty() || test_pos.empty()) throw_invalid("no positives on one side");
  if (train_neg.size() < train_pos.size() || test_neg.size() < test_pos.size()) {
    throw_invalid("fewer negatives than positives",
                  std::to_string(train_neg.size()) + "/" + std::to_string(train_pos.size()) +
                      " train, " + std::to_string(test_neg.size()) + "/" +
                      std::to_string(test_pos.size()) + " test");
  }

  // Draws are shared by every cell.
  struct Draw {
    std::vector<std::size_t> train, test;
    std::vector<int> y_train;
    std::vector<bool> test_animal;
  };
  std::vector<Draw> draws;
  for (int r = 0; r < cfg.repeats; ++r) {
    std::mt19937_64 rng(cfg.seed + 1000003ULL * static_cast<std::uint64_t>(r));
    Draw d;
    auto tn = draw(train_neg, train_pos.size(), rng);
    auto sn = draw(test_neg, test_pos.size(), rng);
    for (auto i : train_pos) d.train.push_back(i), d.y_train.push_back(1);
    for (auto i : tn) d.train.push_back(i), d.y_train.push_back(-1);
    for (auto i : test_pos) d.test.push_back(i), d.test_animal.push_back(true);
    for (auto i : sn) d.test.push_back(i), d.test_animal.push_back(false);
    draws.push_back(std::move(d));
  }

  std::vector<AblationResult> results;
  for (auto const& key : cfg.cells()) {
    auto features = prepare_features(bank, key.kind, key.k, key.gsd_cm, train_rows, test_rows);
    AblationResult res;
    res.key = key;
    for (int r = 0; r < cfg.repeats; ++r) {
      auto const& d = draws[static_cast<std::size_t>(r)];
      Matrix x = take_rows(features.train, d.train);
      Matrix xt = take_rows(features.test, d.test);
      SvmOptions base;
      base.seed = cfg.seed + static_cast<std::uint64_t>(r);
      auto cv = cross_validate_c(x, d.y_train, cfg.c_grid, base, cfg.cv_folds, base.seed);
      base.c = cv.best_c;
      auto model = train_linear_svm(x, d.y_train, base);
      Vector scores = xt * model.w;
      std::vector<ScoredExample> scored;
      for (std::size_t i = 0; i < d.test.size(); ++i) {
        scored.push_back({props[test_rows[d.test[i]]].proposal_id,
                          scores[static_cast<Eigen::Index>(i)] + model.b, d.test_animal[i]});
      }
      res.runs.push_back(roc_curve(scored));
      res.chosen_c.push_back(cv.best_c);
    }
    res.mean = average_curves(res.runs, unit_grid(101));
    log_info("ablation " + to_string(key) + ": mean AUC " + std::to_string(res.mean.auc));
    results.push_back(std::move(res));
  }
  return results;
}

// Unbalanced evaluation -------------------------------------------------------

std::string class_ratio(std::size_t positives, std::size_t negatives) {
  if (positives == 0) return "1:inf";
  return "1:" + std::to_string(std::llround(static_cast<double>(negatives) /
                                            static_cast<double>(positives)));
}

UnbalancedReport run_unbalanced_eval(FeatureMatrix const& train,
                                     std::span<Proposal const> train_props,
                                     FeatureMatrix const& test,
                                     std::span<Proposal const> test_props,
                                     UnbalancedConfig const& cfg) {
  if (train.rows() != train_props.size() || test.rows() != test_props.size()) {
    throw_invalid("feature rows and proposals differ in count");
  }
  std::set<std::string> train_images;
  for (auto const& p : train_props) train_images.insert(p.image_id);
  for (auto const& p : test_props) {
    if (train_images.contains(p.image_id)) {
      throw_invalid("image contributes to both train and test sets", p.image_id);
    }
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < train_props.size(); ++i) {
    if (train_props[i].label == ProposalLabel::kAnimal) pos.push_back(i);
    if (train_props[i].label == ProposalLabel::kBackground) neg.push_back(i);
  }
  UnbalancedReport rep;
  rep.train_positives = pos.size();
  rep.train_negatives = neg.size();
  auto build = build_ensemble(train.select(pos), train.select(neg), cfg.ensemble);
  rep.members = build.ensemble.members.size();
  rep.dropped = build.dropped;

  std::vector<std::size_t> eval_rows;
  for (std::size_t i = 0; i < test_props.size(); ++i) {
    auto label = test_props[i].label;
    if (label == ProposalLabel::kUnknown) continue;
    eval_rows.push_back(i);
    (label == ProposalLabel::kAnimal ? rep.test_positives : rep.test_negatives) += 1;
  }
  auto eval = test.select(eval_rows);
  auto detections = ensemble_predict(build.ensemble, eval);
  for (std::size_t i = 0; i < eval_rows.size(); ++i) {
    rep.scored.push_back({detections[i].proposal_id, detections[i].max_score,
                          test_props[eval_rows[i]].label == ProposalLabel::kAnimal});
  }
  rep.train_ratio = class_ratio(rep.train_positives, rep.train_negatives);
  rep.test_ratio = class_ratio(rep.test_positives, rep.test_negatives);
  rep.pr = pr_curve(rep.scored);
  rep.recall_at_precision = recall_at_precision(rep.pr, cfg.precision_target);
  log_info("unbalanced run: train " + rep.train_ratio + ", test " + rep.test_ratio +
           ", recall at precision " + std::to_string(cfg.precision_target) + " = " +
           std::to_string(rep.recall_at_precision));
  return rep;
}

UnbalancedReport run_unbalanced_eval(FeatureBank& bank,
                                     std::span<std::size_t const> train_rows,
                                     std::span<std::size_t const> test_rows,
                                     UnbalancedConfig const& cfg) {
  auto const& props = bank.proposals();
  check_disjoint(props, train_rows, test_rows);
  auto features = prepare_features(bank, cfg.kind, cfg.k, cfg.gsd_cm, train_rows, test_rows);
  auto wrap = [&](Matrix values, std::span<std::size_t const> rows) {
    FeatureMatrix m;
    m.kind = cfg.kind;
    m.values = std::move(values);
    for (auto r : rows) m.ids.push_back(props[r].proposal_id);
    return m;
  };
  std::vector<Proposal> train_props, test_props;
  for (auto r : train_rows) train_props.push_back(props[r]);
  for (auto r : test_rows) test_props.push_back(props[r]);
  UnbalancedConfig c = cfg;
  if (c.ensemble.fingerprint.empty()) c.ensemble.fingerprint = features.fingerprint;
  return run_unbalanced_eval(wrap(std::move(features.train), train_rows), train_props,
                             wrap(std::move(features.test), test_rows), test_props, c);
}

// Time-of-day split -------------------------------------------------------------

std::vector<TimePeriod> default_periods() {
  return {{"morning", 9 * 3600 + 13 * 60, 9 * 3600 + 28 * 60},
          {"midday", 13 * 3600 + 8 * 60, 13 * 3600 + 30 * 60}};
}

PeriodSplit split_by_period(std::span<RasterImage const> images,
                            std::span<TimePeriod const> periods) {
  for (std::size_t i = 0; i < periods.size(); ++i) {
    auto const& a = periods[i];
    if (a.start_second > a.end_second) throw_invalid("period ends before it starts", a.name);
    for (std::size_t j = 0; j < i; ++j) {
      auto const& b = periods[j];
      if (a.name == b.name) throw_invalid("duplicate period name", a.name);
      if (a.start_second <= b.end_second && b.start_second <= a.end_second) {
        throw_invalid("periods overlap", b.name + " / " + a.name);
      }
    }
  }
  PeriodSplit out;
  for (auto const& p : periods) out.subsets[p.name];
  for (auto const& img : images) {
    if (!img.acquired_at()) throw_invalid("image has no timestamp", img.id());
    int t = img.acquired_at()->second_of_day();
    auto it = std::find_if(periods.begin(), periods.end(), [&](TimePeriod const& p) {
      return t >= p.start_second && t <= p.end_second;
    });
    if (it == periods.end()) {
      out.unassigned.push_back(img.id());
    } else {
      out.subsets[it->name].push_back(img.id());
    }
  }
  return out;
}

std::map<std::string, std::vector<std::size_t>> equalize_counts(
    std::map<std::string, std::vector<std::size_t>> groups, std::uint64_t seed) {
  if (groups.empty()) return groups;
  std::size_t m = groups.begin()->second.size();
  for (auto const& [_, g] : groups) m = std::min(m, g.size());
  std::mt19937_64 rng(seed);
  for (auto& [_, g] : groups) {
    std::vector<std::size_t> pos(g.size());
    std::iota(pos.begin(), pos.end(), 0);
    std::shuffle(pos.begin(), pos.end(), rng);
    pos.resize(m);
    std::sort(pos.begin(), pos.end());
    std::vector<std::size_t> kept;
    for (auto p : pos) kept.push_back(g[p]);
    g = std::move(kept);
  }
  return groups;
}

std::string ablation_summary_json(std::span<AblationResult const> results,
                                  ExperimentConfig const& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["repeats"] = cfg.repeats;
  j["c_grid"] = cfg.c_grid;
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (auto const& r : results) {
    nlohmann::ordered_json c;
    c["key"] = to_string(r.key);
    c["kind"] = std::string(to_string(r.key.kind));
    c["k"] = r.key.k;
    c["gsd_cm"] = r.key.gsd_cm;
    c["auc"] = r.mean.auc;
    std::vector<double> aucs;
    for (auto const& run : r.runs) aucs.push_back(run.auc);
    c["auc_runs"] = aucs;
    c["chosen_c"] = r.chosen_c;
    cells.push_back(std::move(c));
  }
  return j.dump(2);
}

}  // namespace savanna
