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

#include "savanna/annotation_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>
#include "savanna/error.hpp"
#include "savanna/log.hpp"

namespace savanna {

using nlohmann::json;

double signed_area(std::span<Point2d const> v) {
  double twice = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    auto const& a = v[i];
    auto const& b = v[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return twice / 2.0;
}

namespace {

double cross(Point2d o, Point2d a, Point2d b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(Point2d p, Point2d a, Point2d b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Point2d a, Point2d b, Point2d c, Point2d d) {
  double d1 = cross(c, d, a), d2 = cross(c, d, b);
  double d3 = cross(a, b, c), d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

}  // namespace

bool is_simple_polygon(std::span<Point2d const> v) {
  std::size_t const n = v.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

std::vector<PixelCoord> rasterize_polygon(VolunteerPolygon const& poly,
                                          int width, int height) {
  auto const& v = poly.vertices;
  std::vector<PixelCoord> out;
  if (v.size() < 3 || std::abs(signed_area(v)) < 1e-12) {
    log_warning("degenerate polygon from volunteer " + poly.volunteer_id +
                " on " + poly.image_id + " rasterizes to nothing");
    return out;
  }
  double min_y = v[0].y, max_y = v[0].y;
  for (auto const& p : v) {
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  int const y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
  int const y1 = std::min(height - 1, static_cast<int>(std::ceil(max_y)));
  std::vector<double> crossings;
  for (int y = y0; y <= y1; ++y) {
    double const py = y + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
      if ((v[i].y > py) != (v[j].y > py)) {
        // Same expression as the classic crossing-number test so membership
        // decisions agree bit for bit.
        crossings.push_back((v[j].x - v[i].x) * (py - v[i].y) /
                                (v[j].y - v[i].y) +
                            v[i].x);
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      double const a = crossings[k], b = crossings[k + 1];
      int x = std::max(0, static_cast<int>(std::floor(a - 0.5)) - 1);
      for (; x < width && x + 0.5 < b; ++x) {
        if (x + 0.5 < a) continue;
        out.push_back({x, y});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](PixelCoord a, PixelCoord b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ConsensusMap build_consensus(std::span<VolunteerPolygon const> polys,
                             int viewer_count, int width, int height,
                             std::string image_id) {
  std::map<std::string, std::vector<VolunteerPolygon const*>> by_volunteer;
  for (auto const& p : polys) {
    if (p.image_id != image_id) {
      throw_invalid("polygons from several images passed to build_consensus",
                    p.image_id + " vs " + image_id);
    }
    by_volunteer[p.volunteer_id].push_back(&p);
  }
  if (viewer_count < static_cast<int>(by_volunteer.size())) {
    throw_invalid("viewer_count is smaller than the number of volunteers",
                  std::to_string(viewer_count) + " < " +
                      std::to_string(by_volunteer.size()));
  }
  ConsensusMap map{std::move(image_id), viewer_count,
                   Grid<int>(width, height, 0)};
  BinaryMask covered(width, height, 0);
  for (auto const& [volunteer, list] : by_volunteer) {
    std::fill(covered.values().begin(), covered.values().end(), 0);
    for (auto const* poly : list) {
      for (auto px : rasterize_polygon(*poly, width, height)) {
        covered.at(px.x, px.y) = 1;
      }
    }
    auto cov = covered.values();
    auto tags = map.tag_count.values();
    for (std::size_t i = 0; i < cov.size(); ++i) tags[i] += cov[i];
  }
  return map;
}

std::string_view to_string(Verification v) {
  switch (v) {
    case Verification::kUnverified:
      return "unverified";
    case Verification::kConfirmed:
      return "confirmed";
    case Verification::kRejected:
      return "rejected";
  }
  return "unverified";
}

Verification parse_verification(std::string_view text) {
  if (text == "unverified") return Verification::kUnverified;
  if (text == "confirmed") return Verification::kConfirmed;
  if (text == "rejected") return Verification::kRejected;
  throw_invalid("unknown verification state", std::string(text));
}

std::string_view to_string(ObjectSource s) {
  return s == ObjectSource::kFusion ? "fusion" : "active_learning";
}

std::vector<GroundTruthObject> extract_objects(ConsensusMap const& map) {
  if (map.viewer_count < 3) {
    throw_invalid("fusion needs at least three viewers per image",
                  map.image_id);
  }
  BinaryMask keep(map.width(), map.height());
  auto tags = map.tag_count.values();
  auto bits = keep.values();
  for (std::size_t i = 0; i < tags.size(); ++i) {
    bits[i] = tags[i] > 0 && 2 * tags[i] >= map.viewer_count;
  }
  std::vector<GroundTruthObject> objects;
  for (auto& region : connected_components(keep, Connectivity::kEight)) {
    int support = 0;
    for (auto p : region.pixels) {
      support = std::max(support, map.tag_count.at(p.x, p.y));
    }
    if (support <= 1) continue;
    GroundTruthObject obj;
    obj.object_id = map.image_id + "/gt" + std::to_string(objects.size());
    obj.image_id = map.image_id;
    obj.centroid = region.centroid;
    obj.pixels = std::move(region.pixels);
    obj.supporting_volunteers = support;
    objects.push_back(std::move(obj));
  }
  return objects;
}

std::vector<GroundTruthObject> verify_objects(
    std::vector<GroundTruthObject> objects,
    std::map<std::string, Verification> const& decisions) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    index[objects[i].object_id] = i;
  }
  for (auto const& [id, decision] : decisions) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw Error(ErrorCode::kNotFound, "unknown ground-truth object", id);
    }
    objects[it->second].verified = decision;
  }
  return objects;
}

std::vector<GroundTruthObject> training_objects(
    std::span<GroundTruthObject const> objects) {
  std::vector<GroundTruthObject> out;
  for (auto const& o : objects) {
    if (o.verified != Verification::kRejected) out.push_back(o);
  }
  return out;
}

PolygonDocument parse_polygon_document(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (json::exception const& e) {
    throw_invalid("malformed polygon document", e.what());
  }
  PolygonDocument out;
  try {
    out.image_id = doc.at("image_id").get<std::string>();
    out.viewer_count = doc.at("viewer_count").get<int>();
    for (auto const& p : doc.value("polygons", json::array())) {
      VolunteerPolygon poly;
      poly.image_id = out.image_id;
      auto const& vid = p.at("volunteer_id");
      poly.volunteer_id =
          vid.is_string() ? vid.get<std::string>() : vid.dump();
      for (auto const& v : p.at("vertices")) {
        poly.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      }
      if (poly.vertices.size() < 3 || !is_simple_polygon(poly.vertices)) {
        log_warning("skipping invalid polygon from volunteer " +
                    poly.volunteer_id + " on " + out.image_id);
        continue;
      }
      out.polygons.push_back(std::move(poly));
    }
  } catch (json::exception const& e) {
    throw_invalid("polygon document is missing fields", e.what());
  }
  return out;
}

std::string to_json(PolygonDocument const& doc) {
  json polys = json::array();
  for (auto const& p : doc.polygons) {
    json verts = json::array();
    for (auto const& v : p.vertices) verts.push_back({v.x, v.y});
    polys.push_back({{"volunteer_id", p.volunteer_id}, {"vertices", verts}});
  }
  json out = {{"image_id", doc.image_id},
              {"viewer_count", doc.viewer_count},
              {"polygons", polys}};
  return out.dump(1);
}

void clamp_to_image(PolygonDocument& doc, int width, int height) {
  for (auto& p : doc.polygons) {
    for (auto& v : p.vertices) {
      v.x = std::clamp(v.x, 0.0, static_cast<double>(width));
      v.y = std::clamp(v.y, 0.0, static_cast<double>(height));
    }
  }
}

std::string ground_truth_to_json(std::span<GroundTruthObject const> objects,
                                 bool with_pixels) {
  json out = json::array();
  for (auto const& o : objects) {
    json item = {{"object_id", o.object_id},
                 {"image_id", o.image_id},
                 {"centroid", {o.centroid.x, o.centroid.y}},
                 {"area", o.pixels.size()},
                 {"supporting_volunteers", o.supporting_volunteers},
                 {"verified", to_string(o.verified)},
                 {"source", to_string(o.source)}};
    if (with_pixels) {
      json px = json::array();
      for (auto p : o.pixels) px.push_back({p.x, p.y});
      item["pixels"] = std::move(px);
    }
    out.push_back(std::move(item));
  }
  return out.dump(1);
}

std::vector<GroundTruthObject> ground_truth_from_json(std::string_view text) {
  std::vector<GroundTruthObject> out;
  try {
    for (auto const& item : json::parse(text)) {
      GroundTruthObject o;
      o.object_id = item.at("object_id").get<std::string>();
      o.image_id = item.at("image_id").get<std::string>();
      o.centroid = {item.at("centroid").at(0).get<double>(),
                    item.at("centroid").at(1).get<double>()};
      o.supporting_volunteers = item.value("supporting_volunteers", 0);
      o.verified = parse_verification(item.value("verified", "unverified"));
      o.source = item.value("source", "fusion") == "active_learning"
                     ? ObjectSource::kActiveLearning
                     : ObjectSource::kFusion;
      if (item.contains("pixels")) {
        for (auto const& p : item["pixels"]) {
          o.pixels.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        }
      }
      out.push_back(std::move(o));
    }
  } catch (json::exception const& e) {
    throw_invalid("malformed ground-truth file", e.what());
  }
  return out;
}

}  // namespace savanna
