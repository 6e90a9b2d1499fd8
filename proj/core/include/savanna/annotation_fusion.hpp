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

#ifndef SAVANNA_ANNOTATION_FUSION_HPP_
#define SAVANNA_ANNOTATION_FUSION_HPP_

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "savanna/raster.hpp"

namespace savanna {

/// One volunteer's outline of one animal. Vertices are continuous image
/// coordinates: pixel (x, y) covers [x, x+1) x [y, y+1), so its center is
/// (x + 0.5, y + 0.5).
struct VolunteerPolygon {
  std::string image_id;
  std::string volunteer_id;
  std::vector<Point2d> vertices;
};

double signed_area(std::span<Point2d const> vertices);

/// True when no two non-adjacent edges intersect.
bool is_simple_polygon(std::span<Point2d const> vertices);

/// Pixels whose centers the even-odd rule places inside the polygon.
/// Zero-area polygons yield an empty set and a logged warning.
std::vector<PixelCoord> rasterize_polygon(VolunteerPolygon const& poly,
                                          int width, int height);

/// Per-pixel count of distinct volunteers covering the pixel.
struct ConsensusMap {
  std::string image_id;
  int viewer_count = 0;
  Grid<int> tag_count;
  int width() const { return tag_count.width(); }
  int height() const { return tag_count.height(); }
};

/// All polygons must carry image_id. viewer_count must be at least the
/// number of distinct volunteers seen.
ConsensusMap build_consensus(std::span<VolunteerPolygon const> polys,
                             int viewer_count, int width, int height,
                             std::string image_id);

enum class Verification { kUnverified, kConfirmed, kRejected };
enum class ObjectSource { kFusion, kActiveLearning };

std::string_view to_string(Verification v);
Verification parse_verification(std::string_view text);
std::string_view to_string(ObjectSource s);

struct GroundTruthObject {
  std::string object_id;
  std::string image_id;
  std::vector<PixelCoord> pixels;
  Point2d centroid;
  int supporting_volunteers = 0;
  Verification verified = Verification::kUnverified;
  ObjectSource source = ObjectSource::kFusion;
};

/// Keeps 8-connected regions where 2 * tag_count >= viewer_count and drops
/// regions whose peak support is a single volunteer. Requires
/// viewer_count >= 3.
std::vector<GroundTruthObject> extract_objects(ConsensusMap const& map);

/// Applies confirm/reject decisions. Unknown ids throw kNotFound.
std::vector<GroundTruthObject> verify_objects(
    std::vector<GroundTruthObject> objects,
    std::map<std::string, Verification> const& decisions);

/// Objects eligible for training sets: everything not rejected.
std::vector<GroundTruthObject> training_objects(
    std::span<GroundTruthObject const> objects);

struct PolygonDocument {
  std::string image_id;
  int viewer_count = 0;
  std::vector<VolunteerPolygon> polygons;
};

/// Parses { image_id, viewer_count, polygons: [{volunteer_id, vertices}] }.
/// Polygons with fewer than three vertices or self-intersections are
/// skipped with a warning.
PolygonDocument parse_polygon_document(std::string_view json_text);
std::string to_json(PolygonDocument const& doc);

/// Clamps every vertex into [0, width] x [0, height].
void clamp_to_image(PolygonDocument& doc, int width, int height);

/// Export list: { object_id, image_id, centroid, area,
/// supporting_volunteers, verified, source }. Pixel sets are included
/// under "pixels" only when with_pixels is set (internal caches).
std::string ground_truth_to_json(std::span<GroundTruthObject const> objects,
                                 bool with_pixels = false);
std::vector<GroundTruthObject> ground_truth_from_json(std::string_view text);

}  // namespace savanna

#endif  // SAVANNA_ANNOTATION_FUSION_HPP_
