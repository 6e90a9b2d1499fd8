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

#include "savanna/proposals.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "savanna/error.hpp"

namespace savanna {

std::string_view to_string(ProposalSource s) {
  switch (s) {
    case ProposalSource::kShadow:
      return "shadow";
    case ProposalSource::kEdge:
      return "edge";
    case ProposalSource::kMerged:
      return "merged";
  }
  return "shadow";
}

std::string_view to_string(ProposalLabel l) {
  switch (l) {
    case ProposalLabel::kUnknown:
      return "unknown";
    case ProposalLabel::kAnimal:
      return "animal";
    case ProposalLabel::kBackground:
      return "background";
  }
  return "unknown";
}

ProposalSource parse_proposal_source(std::string_view text) {
  if (text == "shadow") return ProposalSource::kShadow;
  if (text == "edge") return ProposalSource::kEdge;
  if (text == "merged") return ProposalSource::kMerged;
  throw_invalid("unknown proposal source", std::string(text));
}

ProposalLabel parse_proposal_label(std::string_view text) {
  if (text == "unknown") return ProposalLabel::kUnknown;
  if (text == "animal") return ProposalLabel::kAnimal;
  if (text == "background") return ProposalLabel::kBackground;
  throw_invalid("unknown proposal label", std::string(text));
}

void ProposalConfig::validate() const {
  if (min_area_px < 1) throw_invalid("min_area_px must be >= 1");
  if (!(merge_radius_cm > 0.0)) throw_invalid("merge_radius_cm must be > 0");
  if (!(working_gsd_cm > 0.0)) throw_invalid("working_gsd_cm must be > 0");
  if (value_threshold < 0.0 || value_threshold > 255.0) {
    throw_invalid("value_threshold must lie in [0, 255]");
  }
  if (sobel_threshold < 0.0) throw_invalid("sobel_threshold must be >= 0");
}

namespace {

std::vector<Proposal> region_proposals(BinaryMask const& mask,
                                       RasterImage const& img,
                                       ProposalConfig const& cfg,
                                       ProposalSource source) {
  std::vector<Proposal> out;
  for (auto const& r : connected_components(mask, cfg.connectivity)) {
    if (static_cast<int>(r.area()) < cfg.min_area_px) continue;
    Proposal p;
    p.image_id = img.id();
    p.proposal_id = img.id() + ":" + std::string(to_string(source)) +
                    std::to_string(out.size());
    p.centroid = r.centroid;
    p.source = source;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<Proposal> shadow_proposals(RasterImage const& img,
                                       ProposalConfig const& cfg) {
  cfg.validate();
  auto mask = threshold(value_channel(img), cfg.value_threshold,
                        ThresholdDirection::kBelow);
  return region_proposals(mask, img, cfg, ProposalSource::kShadow);
}

std::vector<Proposal> edge_proposals(RasterImage const& img,
                                     ProposalConfig const& cfg) {
  cfg.validate();
  auto mask = threshold(sobel_blue(img), cfg.sobel_threshold,
                        ThresholdDirection::kAbove);
  return region_proposals(mask, img, cfg, ProposalSource::kEdge);
}

std::vector<Proposal> merge_proposals(std::span<Proposal const> props,
                                      ProposalConfig const& cfg) {
  cfg.validate();
  std::size_t const n = props.size();
  for (auto const& p : props) {
    if (p.image_id != props.front().image_id) {
      throw_invalid("merge_proposals works on one image at a time", p.proposal_id);
    }
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  // Sort by x so only a sliding band of candidates is compared.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return props[a].centroid.x < props[b].centroid.x;
  });
  double const radius_px = cfg.merge_radius_cm / cfg.working_gsd_cm;
  for (std::size_t i = 0; i < n; ++i) {
    auto const& a = props[order[i]];
    for (std::size_t j = i + 1; j < n; ++j) {
      auto const& b = props[order[j]];
      if (b.centroid.x - a.centroid.x >= radius_px) break;
      if (distance(a.centroid, b.centroid) * cfg.working_gsd_cm <
          cfg.merge_radius_cm) {
        std::size_t ra = find(order[i]), rb = find(order[j]);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  std::vector<std::size_t> group_order;
  for (std::size_t i = 0; i < n; ++i) {
    auto root = find(i);
    auto [it, inserted] = groups.try_emplace(root);
    if (inserted) group_order.push_back(root);
    it->second.push_back(i);
  }

  std::vector<Proposal> out;
  out.reserve(group_order.size());
  for (auto root : group_order) {
    auto const& members = groups[root];
    Proposal merged = props[members.front()];
    if (members.size() > 1) {
      double sx = 0, sy = 0;
      merged.parents.clear();
      for (auto m : members) {
        sx += props[m].centroid.x;
        sy += props[m].centroid.y;
        auto const& src = props[m];
        if (src.parents.empty()) {
          merged.parents.push_back(src.source);
        } else {
          merged.parents.insert(merged.parents.end(), src.parents.begin(),
                                src.parents.end());
        }
      }
      merged.centroid = {sx / members.size(), sy / members.size()};
      merged.source = ProposalSource::kMerged;
      merged.score.reset();
    }
    merged.proposal_id = merged.image_id + ":p" + std::to_string(out.size());
    out.push_back(std::move(merged));
  }
  return out;
}

std::vector<Proposal> generate_proposals(RasterImage const& img,
                                         ProposalConfig const& cfg) {
  auto props = shadow_proposals(img, cfg);
  auto edges = edge_proposals(img, cfg);
  props.insert(props.end(), std::make_move_iterator(edges.begin()),
               std::make_move_iterator(edges.end()));
  return merge_proposals(props, cfg);
}

std::vector<PixelCoord> downscale_pixels(std::span<PixelCoord const> pixels,
                                         int factor) {
  if (factor <= 0) throw_invalid("downscale factor must be >= 1");
  std::vector<PixelCoord> out;
  out.reserve(pixels.size());
  for (auto p : pixels) out.push_back({p.x / factor, p.y / factor});
  std::sort(out.begin(), out.end(), [](PixelCoord a, PixelCoord b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void label_proposals(std::span<Proposal> props,
                     std::span<GroundTruthObject const> ground_truth,
                     ProposalConfig const& cfg) {
  cfg.validate();
  std::map<std::string, std::vector<GroundTruthObject const*>> by_image;
  for (auto const& g : ground_truth) {
    if (g.verified == Verification::kRejected) continue;
    by_image[g.image_id].push_back(&g);
  }
  for (auto& p : props) {
    p.label = ProposalLabel::kBackground;
    auto it = by_image.find(p.image_id);
    if (it == by_image.end()) continue;
    for (auto const* g : it->second) {
      bool hit = std::any_of(g->pixels.begin(), g->pixels.end(),
                             [&](PixelCoord q) {
                               double d = std::hypot(p.centroid.x - q.x,
                                                     p.centroid.y - q.y);
                               return d * cfg.working_gsd_cm <
                                      cfg.merge_radius_cm;
                             });
      if (hit) {
        p.label = ProposalLabel::kAnimal;
        break;
      }
    }
  }
}

std::string proposals_to_csv(std::span<Proposal const> props) {
  std::ostringstream out;
  out.precision(17);
  out << "proposal_id,image_id,x,y,source,label,score\n";
  for (auto const& p : props) {
    out << p.proposal_id << ',' << p.image_id << ',' << p.centroid.x << ','
        << p.centroid.y << ',' << to_string(p.source) << ','
        << to_string(p.label) << ',';
    if (p.score) out << *p.score;
    out << '\n';
  }
  return out.str();
}

namespace {

std::vector<std::string> split_csv_line(std::string const& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double(std::string const& s, std::string_view what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (std::exception const&) {
    throw_invalid("bad number in proposals CSV", std::string(what) + "=" + s);
  }
}

}  // namespace

std::vector<Proposal> proposals_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("proposal_id,image_id,x,y,source,label,score", 0) != 0) {
    throw_invalid("proposals CSV header mismatch");
  }
  std::vector<Proposal> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != 7) throw_invalid("proposals CSV row has wrong arity", line);
    Proposal p;
    p.proposal_id = f[0];
    p.image_id = f[1];
    p.centroid = {parse_double(f[2], "x"), parse_double(f[3], "y")};
    p.source = parse_proposal_source(f[4]);
    p.label = parse_proposal_label(f[5]);
    if (!f[6].empty()) p.score = parse_double(f[6], "score");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace savanna
