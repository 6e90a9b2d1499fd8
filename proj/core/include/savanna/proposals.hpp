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

#ifndef SAVANNA_PROPOSALS_HPP_
#define SAVANNA_PROPOSALS_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "savanna/annotation_fusion.hpp"
#include "savanna/raster.hpp"

namespace savanna {

enum class ProposalSource { kShadow, kEdge, kMerged };
enum class ProposalLabel { kUnknown, kAnimal, kBackground };

std::string_view to_string(ProposalSource s);
std::string_view to_string(ProposalLabel l);
ProposalSource parse_proposal_source(std::string_view text);
ProposalLabel parse_proposal_label(std::string_view text);

/// Candidate animal location in working-resolution pixel coordinates.
struct Proposal {
  std::string proposal_id;
  std::string image_id;
  Point2d centroid;
  ProposalSource source = ProposalSource::kShadow;
  ProposalLabel label = ProposalLabel::kUnknown;
  std::optional<double> score;
  /// Sources of the members a merged proposal was built from.
  std::vector<ProposalSource> parents;
};

struct ProposalConfig {
  double value_threshold = 60.0;
  double sobel_threshold = 120.0;
  int min_area_px = 3;
  double merge_radius_cm = 60.0;
  double working_gsd_cm = 8.0;
  Connectivity connectivity = Connectivity::kEight;

  void validate() const;
};

/// Centroids of dark regions (value channel below threshold).
std::vector<Proposal> shadow_proposals(RasterImage const& img,
                                       ProposalConfig const& cfg);

/// Centroids of strong blue-channel edge regions.
std::vector<Proposal> edge_proposals(RasterImage const& img,
                                     ProposalConfig const& cfg);

/// Single-linkage merge: proposals closer than merge_radius_cm are grouped
/// transitively and replaced by their mean centroid. Output follows the
/// order of each group's first member; ids are reassigned as
/// "<image_id>:p<n>". All proposals must belong to one image.
std::vector<Proposal> merge_proposals(std::span<Proposal const> props,
                                      ProposalConfig const& cfg);

/// shadow + edge + merge on an image already at working resolution.
std::vector<Proposal> generate_proposals(RasterImage const& img,
                                         ProposalConfig const& cfg);

/// Ground-truth pixel sets rescaled to a coarser grid by integer division.
std::vector<PixelCoord> downscale_pixels(std::span<PixelCoord const> pixels,
                                         int factor);

/// Labels a proposal animal iff its centroid is closer than merge_radius_cm
/// to a pixel of a non-rejected ground-truth object of the same image.
/// Ground-truth pixels must already be at working resolution.
void label_proposals(std::span<Proposal> props,
                     std::span<GroundTruthObject const> ground_truth,
                     ProposalConfig const& cfg);

/// CSV with header proposal_id,image_id,x,y,source,label,score.
std::string proposals_to_csv(std::span<Proposal const> props);
std::vector<Proposal> proposals_from_csv(std::string_view text);

}  // namespace savanna

#endif  // SAVANNA_PROPOSALS_HPP_
