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

#ifndef SAVANNA_DATASET_HPP_
#define SAVANNA_DATASET_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "savanna/annotation_fusion.hpp"
#include "savanna/detector.hpp"
#include "savanna/experiments.hpp"
#include "savanna/features.hpp"
#include "savanna/proposals.hpp"
#include "savanna/raster.hpp"
#include "savanna/synth.hpp"

namespace savanna {

struct ImageEntry {
  std::string image_id;
  /// Relative to the dataset root.
  std::string file;
  double gsd_cm = 0.0;
  std::optional<std::string> acquired_at;
  int width = 0;
  int height = 0;
};

/// On-disk layout under the dataset root:
///   images/*.png             source imagery
///   annotations/*.json       volunteer polygon documents
///   manifest.json            written by ingest_dataset
///   derived/                 cached pipeline artifacts
///   sessions/<id>/           active-learning logs and snapshots
struct DatasetManifest {
  std::string dataset_id;
  std::vector<ImageEntry> images;
  std::vector<std::string> annotation_files;
  /// Artifact name -> path relative to the root.
  std::map<std::string, std::string> derived;
};

std::string to_json(DatasetManifest const& m);
DatasetManifest manifest_from_json(std::string_view text);

struct RejectedFile {
  std::string file;
  std::string reason;
};

struct IngestReport {
  DatasetManifest manifest;
  std::vector<RejectedFile> rejected;
};

/// Scans images/ (PNG, sorted by name) and annotations/, validates every
/// image and writes manifest.json. Undecodable or non-RGB files are listed
/// in the report and left out. The manifest carries no timestamps of its
/// own, so re-ingesting an unchanged directory is byte-identical. Known
/// derived artifacts already on disk are listed.
IngestReport ingest_dataset(std::filesystem::path const& root,
                            double fallback_gsd_cm = 4.0);

/// Lays a generated scene set out as a dataset directory: images/*.png,
/// annotations/<image>.json and the exact animal masks under
/// truth/ground_truth.json. Existing files are overwritten.
void write_synth_dataset(SynthDataset const& data, std::filesystem::path const& root);

/// Settings shared by every pipeline stage.
struct PipelineConfig {
  ProposalConfig proposals;
  FeatureBankConfig features;
  FeatureKind kind = FeatureKind::kCombined;
  int k = 100;
  double gsd_cm = 8.0;
  double train_fraction = 2.0 / 3.0;
  std::uint64_t split_seed = 7;
  EnsembleConfig ensemble;
  ExperimentConfig grid;

  /// Stable text identifying everything that shapes derived artifacts.
  std::string fingerprint() const;
};

struct TrainSummary {
  std::size_t members = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::string ratio;
  std::vector<DroppedExemplar> dropped;
};

struct EvaluationSummary {
  std::vector<AblationResult> ablation;
  std::optional<UnbalancedReport> unbalanced;
};

/// Training pools for an active-learning session: labelled proposals of
/// the train images, features normalized on those rows.
struct SessionPools {
  FeatureMatrix positives;
  FeatureMatrix negatives;
  /// Test rows for live metrics, with truth labels.
  FeatureMatrix test;
  std::vector<bool> test_animal;
  std::string fingerprint;
};

/// A dataset directory and its pipeline. Every stage caches its output
/// under derived/ and reuses it while the configuration fingerprint
/// matches.
class Dataset {
 public:
  static Dataset open(std::filesystem::path root, PipelineConfig cfg = {});

  std::filesystem::path const& root() const { return root_; }
  DatasetManifest const& manifest() const { return manifest_; }
  std::string const& id() const { return manifest_.dataset_id; }
  PipelineConfig const& config() const { return cfg_; }

  std::vector<RasterImage> load_images() const;
  RasterImage load_image(std::string const& image_id) const;

  /// Consensus fusion of the annotation documents.
  std::vector<GroundTruthObject> fuse();
  std::vector<GroundTruthObject> ground_truth();
  std::vector<Proposal> proposals();
  ImageSplit split();
  Codebook codebook(int k, double gsd_cm);
  /// Raw descriptors (HOC or BoVW), rows parallel to proposals().
  FeatureMatrix features(FeatureKind kind, int k, double gsd_cm);
  TrainSummary train();
  Ensemble model();
  EvaluationSummary evaluate(bool run_grid = true, bool run_unbalanced = true);
  SessionPools session_pools();

  /// Fusion objects plus animals promoted in any session, minus proposals
  /// marked unclear and objects rejected in derived/verification.json.
  /// Writes derived/ground_truth_export.json and returns its path.
  std::filesystem::path export_ground_truth();

  /// Runs named stages in order: fuse, proposals, codebook, features,
  /// train, evaluate. Returns a JSON summary per stage.
  std::string run_stages(std::vector<std::string> const& stages);

 private:
  Dataset(std::filesystem::path root, DatasetManifest manifest, PipelineConfig cfg);
  std::filesystem::path derived(std::string const& name) const;
  FeatureBank& bank();
  void record(std::string const& name, std::filesystem::path const& path);

  std::filesystem::path root_;
  DatasetManifest manifest_;
  PipelineConfig cfg_;
  std::optional<std::vector<GroundTruthObject>> ground_truth_;
  std::optional<std::vector<Proposal>> proposals_;
  std::unique_ptr<FeatureBank> bank_;
};

}  // namespace savanna

#endif  // SAVANNA_DATASET_HPP_
