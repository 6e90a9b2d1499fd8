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

// Brute-force reference implementations. Each one is written for clarity
// over speed and shares no code with the library routine it checks.

#ifndef SAVANNA_TESTS_ORACLES_HPP_
#define SAVANNA_TESTS_ORACLES_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "savanna/annotation_fusion.hpp"
#include "savanna/detector.hpp"
#include "savanna/features.hpp"
#include "savanna/metrics.hpp"
#include "savanna/raster.hpp"

namespace savanna::oracle {

RasterImage random_image(int width, int height, std::uint64_t seed, std::string id = "img");
BinaryMask random_mask(int width, int height, double density, std::uint64_t seed);

/// Per-pixel label (-1 for clear bits) from an explicit-stack flood fill;
/// labels number regions in scanline order of their first pixel.
Grid<int> flood_fill_labels(BinaryMask const& mask, Connectivity connectivity, int* count = nullptr);

ScalarMap value_max(RasterImage const& img);
/// Direct 3x3 convolution with clamped reads.
ScalarMap sobel_naive(RasterImage const& img);
RasterImage block_average(RasterImage const& img, int factor);

/// Even-odd ray cast at the pixel center.
bool point_in_polygon(std::span<Point2d const> poly, Point2d p);

std::vector<double> hoc_counts(RasterImage const& img, PixelCoord center, int window, int bins);
std::vector<double> bovw_counts(Grid<int> const& words, PixelCoord center, int window, int k);
/// Exhaustive nearest center of every pixel's window.
Grid<int> nearest_words(RasterImage const& img, Matrix const& centers, int window);

/// Minimum within-cluster sum of squares over all 2-partitions (n <= 16).
std::pair<double, std::vector<int>> best_two_partition(Matrix const& points);

/// Grid search over (w, b) with repeated local refinement. Returns the
/// best objective found and its parameters.
struct BruteSvm {
  double objective = 0.0;
  Vector w;
  double b = 0.0;
};
BruteSvm svm_grid_search(Matrix const& x, std::span<int const> y, double c, ClassWeights weights);
double svm_primal(Vector const& w, double b, Matrix const& x, std::span<int const> y, double c,
                  ClassWeights weights);

/// Every distinct score taken as a threshold, counts recomputed from
/// scratch; sentinels as documented for the library curves.
std::vector<CurvePoint> enumerate_pr(std::span<ScoredExample const> scored);
std::vector<CurvePoint> enumerate_roc(std::span<ScoredExample const> scored);

}  // namespace savanna::oracle

#endif  // SAVANNA_TESTS_ORACLES_HPP_
