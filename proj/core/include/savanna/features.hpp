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

#ifndef SAVANNA_FEATURES_HPP_
#define SAVANNA_FEATURES_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "savanna/linalg.hpp"
#include "savanna/raster.hpp"

namespace savanna {

inline constexpr int kWindow = 25;
inline constexpr int kHocBins = 10;
inline constexpr int kPatchDim = kWindow * kWindow * 3;

enum class FeatureKind { kHoc, kBovw, kCombined };
std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

struct FeatureVector {
  std::string proposal_id;
  FeatureKind kind = FeatureKind::kHoc;
  std::vector<double> values;
};

/// Rows of per-proposal descriptors sharing one kind.
struct FeatureMatrix {
  FeatureKind kind = FeatureKind::kHoc;
  std::vector<std::string> ids;
  Matrix values;

  std::size_t rows() const { return ids.size(); }
  /// Rows selected by index, in the given order.
  FeatureMatrix select(std::span<std::size_t const> rows) const;
};

/// Pixel the window of a real-valued centroid is centered on.
PixelCoord window_center(Point2d centroid);

/// Per-channel histogram over a clamp-padded window. Value v falls in bin
/// floor(v * bins / 256), i.e. uniform bins of width 25.6 for ten bins.
/// Channels are concatenated R, G, B.
FeatureVector extract_hoc(RasterImage const& img, Point2d centroid,
                          std::string proposal_id = {}, int window = kWindow,
                          int bins = kHocBins);

/// Writes the clamp-padded window around center in planar order:
/// index = c * window^2 + dy * window + dx, channels R, G, B.
void flatten_patch(RasterImage const& img, PixelCoord center,
                   std::span<double> out, int window = kWindow);

struct PatchSamplingConfig {
  int n_total = 20000;
  int n_positive = 5000;
  std::uint64_t seed = 0;
  int window = kWindow;
};

struct PatchSample {
  std::size_t image_index = 0;
  PixelCoord center;
  bool positive = false;
};

struct PatchSet {
  Matrix patches;
  std::vector<PatchSample> samples;
};

/// Stratified draw: n_positive centers uniformly over the pooled
/// ground-truth pixels, the rest uniformly over non-ground-truth pixels.
/// positive_pixels[i] lists ground-truth pixels of images[i].
PatchSet sample_patches(std::span<RasterImage const> images,
                        std::span<std::vector<PixelCoord> const> positive_pixels,
                        PatchSamplingConfig const& cfg);

struct KMeansConfig {
  int k = 100;
  std::uint64_t seed = 0;
  int max_iter = 100;
  /// Stop when (previous - current) / previous distortion drops below this.
  double tol = 1e-4;
};

struct Codebook {
  int k = 0;
  int dim = 0;
  std::uint64_t seed = 0;
  int iterations_run = 0;
  double distortion = 0.0;
  /// Distortion after each assignment step, oldest first.
  std::vector<double> distortion_history;
  Matrix centers;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded
/// to the point farthest from its current center.
Codebook train_codebook(Matrix const& patches, KMeansConfig const& cfg);

/// Nearest center per row by squared Euclidean distance, ties to the lower
/// index.
std::vector<int> nearest_centers(Matrix const& rows, Codebook const& codebook);

struct WordMap {
  std::string image_id;
  int k = 0;
  Grid<int> words;
};

/// Dense visual-word map: every pixel's clamp-padded window is assigned to
/// its nearest center. Distances come from FFT correlation; pixels whose
/// two best candidates are within rounding distance are re-resolved with
/// exact sums, so results equal direct evaluation.
WordMap assign_words(RasterImage const& img, Codebook const& codebook);
std::vector<WordMap> assign_words(std::span<RasterImage const> images,
                                  Codebook const& codebook);

FeatureVector extract_bovw(WordMap const& words, Point2d centroid,
                           std::string proposal_id = {},
                           int window = kWindow);

struct NormalizationStats {
  Vector mean;
  /// Population standard deviation, zeros replaced by one.
  Vector stddev;
};

NormalizationStats fit_normalization(Matrix const& train);

/// z-scores with the given stats, then unit l2 rows. All-zero rows stay
/// zero and are reported through the log.
Matrix apply_normalization(NormalizationStats const& stats, Matrix m);

struct NormalizedFeatures {
  Matrix train;
  std::vector<Matrix> others;
  NormalizationStats stats;
};

NormalizedFeatures normalize_features(Matrix const& train,
                                      std::span<Matrix const> others = {});

/// Concatenation of already-normalized HOC and BoVW blocks, rescaled to
/// unit l2.
FeatureVector combine(FeatureVector const& hoc, FeatureVector const& bovw);
Matrix combine_rows(Matrix const& hoc, Matrix const& bovw);

void normalize_rows(Matrix& m);

// Persistence ---------------------------------------------------------------

/// Header: "SVCB", u32 version, u32 k, u32 dim, u64 seed; then k * dim
/// little-endian f64 centers, row-major.
std::vector<std::uint8_t> encode_codebook(Codebook const& codebook);
Codebook decode_codebook(std::span<std::uint8_t const> bytes);
void save_codebook(std::filesystem::path const& path, Codebook const& codebook);
Codebook load_codebook(std::filesystem::path const& path);

/// CSV: proposal_id,f0,...,f{d-1}.
std::string feature_matrix_to_csv(FeatureMatrix const& m);
FeatureMatrix feature_matrix_from_csv(std::string_view text, FeatureKind kind);

}  // namespace savanna

#endif  // SAVANNA_FEATURES_HPP_
