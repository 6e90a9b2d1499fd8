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

#include "fixtures.hpp"

#include <random>

namespace savanna::fixtures {
namespace fs = std::filesystem;

TempDir::TempDir() {
  std::random_device rd;
  auto base = fs::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto p = base / ("savanna-test-" + std::to_string(rd()));
    if (fs::create_directory(p)) {
      path_ = p;
      return;
    }
  }
  throw std::runtime_error("cannot create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

SynthParams small_params(int images) {
  SynthParams p;
  p.image_count = images;
  p.width = 256;
  p.height = 256;
  p.animals_per_image = 2;
  return p;
}

PipelineConfig light_pipeline() {
  PipelineConfig c;
  c.k = 8;
  c.features.patches.n_total = 1500;
  c.features.patches.n_positive = 400;
  c.features.kmeans.max_iter = 15;
  c.grid.kinds = {FeatureKind::kHoc};
  c.grid.repeats = 1;
  c.grid.c_grid = {0.1, 1.0};
  c.grid.cv_folds = 3;
  return c;
}

std::filesystem::path make_dataset(std::filesystem::path const& root, std::string const& name,
                                   int images) {
  auto dir = root / name;
  write_synth_dataset(synth_generate(small_params(images)), dir);
  return dir;
}

Benchmark make_benchmark(SynthParams const& params, FeatureBankConfig const& features,
                         double train_fraction, std::uint64_t split_seed) {
  Benchmark b;
  b.params = params;
  b.data = synth_generate(params);
  b.proposals.working_gsd_cm = features.working_gsd_cm;
  b.props = propose_and_label(b.data.images, b.data.ground_truth, b.proposals);
  std::vector<std::string> ids;
  for (auto const& img : b.data.images) ids.push_back(img.id());
  b.split = split_images(ids, train_fraction, split_seed);
  b.train_rows = rows_in_images(b.props, b.split.train);
  b.test_rows = rows_in_images(b.props, b.split.test);
  b.bank = std::make_unique<FeatureBank>(b.data.images, b.data.ground_truth, b.props,
                                         b.split.train, features);
  return b;
}

namespace {

FeatureMatrix take(Matrix const& values, std::vector<Proposal> const& props,
                   std::vector<std::size_t> const& rows, std::vector<std::size_t> const& pick,
                   FeatureKind kind) {
  FeatureMatrix m;
  m.kind = kind;
  m.values.resize(static_cast<Eigen::Index>(pick.size()), values.cols());
  for (std::size_t i = 0; i < pick.size(); ++i) {
    m.ids.push_back(props[rows[pick[i]]].proposal_id);
    m.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(pick[i]));
  }
  return m;
}

}  // namespace

Pools make_pools(Benchmark& b, FeatureKind kind, int k, double gsd_cm) {
  auto prepared = prepare_features(*b.bank, kind, k, gsd_cm, b.train_rows, b.test_rows);
  Pools p;
  std::vector<std::size_t> pos, neg, test;
  for (std::size_t i = 0; i < b.train_rows.size(); ++i) {
    auto const& prop = b.props[b.train_rows[i]];
    if (prop.label == ProposalLabel::kUnknown) continue;
    bool animal = prop.label == ProposalLabel::kAnimal;
    (animal ? pos : neg).push_back(i);
    p.oracle[prop.proposal_id] = animal;
  }
  for (std::size_t i = 0; i < b.test_rows.size(); ++i) {
    auto label = b.props[b.test_rows[i]].label;
    if (label == ProposalLabel::kUnknown) continue;
    test.push_back(i);
    p.test_animal.push_back(label == ProposalLabel::kAnimal);
  }
  p.positives = take(prepared.train, b.props, b.train_rows, pos, kind);
  p.negatives = take(prepared.train, b.props, b.train_rows, neg, kind);
  p.test = take(prepared.test, b.props, b.test_rows, test, kind);
  return p;
}

std::vector<ScoredExample> score_rows(Ensemble const& ensemble, FeatureMatrix const& rows,
                                      std::vector<bool> const& animal) {
  auto det = ensemble_predict(ensemble, rows);
  std::vector<ScoredExample> out;
  for (std::size_t i = 0; i < det.size(); ++i) {
    out.push_back({det[i].proposal_id, det[i].max_score, animal[i]});
  }
  return out;
}

}  // namespace savanna::fixtures
