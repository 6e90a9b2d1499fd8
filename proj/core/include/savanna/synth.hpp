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

#ifndef SAVANNA_SYNTH_HPP_
#define SAVANNA_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "savanna/annotation_fusion.hpp"
#include "savanna/raster.hpp"

namespace savanna {

/// Seeded generator of aerial savanna scenes: sandy textured ground,
/// elliptical animals with species-specific coats and offset shadows, and
/// the usual confusers (bushes, dark burrow holes, rocks, termite mounds).
/// Distances are in centimetres on the ground.
struct SynthParams {
  int image_count = 60;
  int width = 512;
  int height = 512;
  double gsd_cm = 4.0;
  int animals_per_image = 3;
  /// Extra animal-free images appended after the regular ones.
  int empty_images = 0;
  double animal_length_min_cm = 100.0;
  double animal_length_max_cm = 180.0;
  double animal_width_min_cm = 40.0;
  double animal_width_max_cm = 70.0;
  /// Shadow displacement in the morning; midday shadows use the midday
  /// fraction of it.
  double shadow_offset_cm = 40.0;
  double midday_shadow_fraction = 0.35;
  /// Fraction of ground brightness left inside a shadow.
  double shadow_darkness = 0.25;
  double texture_scale_cm = 160.0;
  /// Confuser counts per 100 square metres.
  double bush_density = 1.6;
  double hole_density = 1.2;
  double rock_density = 1.0;
  double mound_density = 0.6;
  /// Fallen branches and small grass tufts: the bulk of easy clutter.
  double log_density = 0.8;
  double tuft_density = 60.0;
  /// Simulated crowd: polygons per animal come from that many viewers,
  /// each missing an animal with probability volunteer_miss_rate. Some
  /// images get a stray single-volunteer polygon.
  int volunteers = 5;
  double volunteer_miss_rate = 0.1;
  double stray_polygon_rate = 0.3;
  std::string date = "2014-05-12";
  std::uint64_t seed = 42;

  void validate() const;
};

std::string to_json(SynthParams const& p);
/// Missing keys keep their defaults; unknown keys are rejected.
SynthParams synth_params_from_json(std::string_view text);

struct SynthDataset {
  std::vector<RasterImage> images;
  /// Exact animal pixel sets at native resolution, one object per animal.
  std::vector<GroundTruthObject> ground_truth;
  /// Simulated volunteer outlines, one document per image.
  std::vector<PolygonDocument> annotations;
};

SynthDataset synth_generate(SynthParams const& params);

}  // namespace savanna

#endif  // SAVANNA_SYNTH_HPP_
