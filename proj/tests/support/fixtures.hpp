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

// Shared fixtures: temporary directories and a seeded synthetic benchmark
// carried through proposals and feature extraction.

#ifndef SAVANNA_TESTS_FIXTURES_HPP_
#define SAVANNA_TESTS_FIXTURES_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "savanna/dataset.hpp"
#include "savanna/experiments.hpp"
#include "savanna/synth.hpp"

namespace savanna::fixtures {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(TempDir const&) = delete;
  TempDir& operator=(TempDir const&) = delete;
  std::filesystem::path const& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// A few small scenes for unit tests that need real imagery.
SynthParams small_params(int images = 8);

/// Pipeline settings small enough for unit tests: few patches, k = 8 and
/// a one-repeat HOC-only grid.
PipelineConfig light_pipeline();

/// Writes small_params(images) as a dataset under root/name.
std::filesystem::path make_dataset(std::filesystem::path const& root, std::string const& name,
                                   int images = 6);

struct Benchmark {
  SynthParams params;
  SynthDataset data;
  ProposalConfig proposals;
  std::vector<Proposal> props;
  ImageSplit split;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::unique_ptr<FeatureBank> bank;
};

/// Generates, proposes, labels and splits; features stay lazy in the bank.
Benchmark make_benchmark(SynthParams const& params, FeatureBankConfig const& features,
                         double train_fraction = 2.0 / 3.0, std::uint64_t split_seed = 7);

/// Labelled train pools and the test rows of one descriptor setting.
struct Pools {
  FeatureMatrix positives;
  FeatureMatrix negatives;
  FeatureMatrix test;
  std::vector<bool> test_animal;
  /// Truth of every train row, keyed by proposal id.
  std::map<std::string, bool> oracle;
};

Pools make_pools(Benchmark& b, FeatureKind kind, int k, double gsd_cm);

std::vector<ScoredExample> score_rows(Ensemble const& ensemble, FeatureMatrix const& rows,
                                      std::vector<bool> const& animal);

}  // namespace savanna::fixtures

#endif  // SAVANNA_TESTS_FIXTURES_HPP_
