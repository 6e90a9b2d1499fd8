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

#include "savanna/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "savanna/error.hpp"

namespace savanna {

double distance(Point2d a, Point2d b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

Timestamp Timestamp::parse(std::string text) {
  std::string_view clock = text;
  if (auto t = clock.find('T'); t != std::string_view::npos) {
    clock = clock.substr(t + 1);
  } else if (auto space = clock.find(' '); space != std::string_view::npos) {
    clock = clock.substr(space + 1);
  }
  int h = 0, m = 0, s = 0;
  int fields = std::sscanf(std::string(clock).c_str(), "%d:%d:%d", &h, &m, &s);
  if (fields < 2 || h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 60) {
    throw_invalid("unparseable timestamp", text);
  }
  Timestamp ts;
  ts.second_of_day_ = h * 3600 + m * 60 + (fields == 3 ? s : 0);
  ts.text_ = std::move(text);
  return ts;
}

RasterImage::RasterImage(std::string image_id, int width, int height,
                         double gsd_cm, std::optional<Timestamp> acquired_at)
    : id_(std::move(image_id)),
      width_(width),
      height_(height),
      gsd_cm_(gsd_cm),
      acquired_at_(std::move(acquired_at)) {
  if (width <= 0 || height <= 0) {
    throw_invalid("image dimensions must be positive", id_);
  }
  if (!(gsd_cm > 0.0) || !std::isfinite(gsd_cm)) {
    throw_invalid("gsd_cm must be positive", id_);
  }
  pixels_.assign(static_cast<std::size_t>(width) * height * 3, 0);
}

std::uint8_t RasterImage::clamped(int x, int y, int c) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return channel(x, y, c);
}

Rgb RasterImage::pixel(int x, int y) const {
  auto const* p = &pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3];
  return {p[0], p[1], p[2]};
}

void RasterImage::set_pixel(int x, int y, Rgb value) {
  auto* p = &pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3];
  p[0] = value.r;
  p[1] = value.g;
  p[2] = value.b;
}

ScalarMap value_channel(RasterImage const& img) {
  ScalarMap out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      auto p = img.pixel(x, y);
      out.at(x, y) = std::max({p.r, p.g, p.b});
    }
  }
  return out;
}

ScalarMap sobel_blue(RasterImage const& img) {
  constexpr int kBlue = 2;
  ScalarMap out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      auto v = [&](int dx, int dy) {
        return static_cast<int>(img.clamped(x + dx, y + dy, kBlue));
      };
      int gx = (v(1, -1) + 2 * v(1, 0) + v(1, 1)) -
               (v(-1, -1) + 2 * v(-1, 0) + v(-1, 1));
      int gy = (v(-1, 1) + 2 * v(0, 1) + v(1, 1)) -
               (v(-1, -1) + 2 * v(0, -1) + v(1, -1));
      out.at(x, y) = std::sqrt(static_cast<double>(gx * gx + gy * gy));
    }
  }
  return out;
}

BinaryMask threshold(ScalarMap const& map, double t,
                     ThresholdDirection direction) {
  BinaryMask out(map.width(), map.height());
  auto src = map.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = direction == ThresholdDirection::kBelow ? src[i] < t : src[i] > t;
  }
  return out;
}

namespace {

class DisjointSet {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller label wins so roots stay at the earliest provisional label.
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

ConnectedRegion make_region(std::vector<PixelCoord> pixels) {
  ConnectedRegion r;
  r.pixels = std::move(pixels);
  if (r.pixels.empty()) return r;
  double sx = 0, sy = 0;
  r.bbox = {r.pixels[0].x, r.pixels[0].y, r.pixels[0].x, r.pixels[0].y};
  for (auto p : r.pixels) {
    sx += p.x;
    sy += p.y;
    r.bbox.min_x = std::min(r.bbox.min_x, p.x);
    r.bbox.min_y = std::min(r.bbox.min_y, p.y);
    r.bbox.max_x = std::max(r.bbox.max_x, p.x);
    r.bbox.max_y = std::max(r.bbox.max_y, p.y);
  }
  double n = static_cast<double>(r.pixels.size());
  r.centroid = {sx / n, sy / n};
  return r;
}

std::vector<ConnectedRegion> connected_components(BinaryMask const& mask,
                                                  Connectivity connectivity) {
  int const w = mask.width();
  int const h = mask.height();
  Grid<int> labels(w, h, -1);
  DisjointSet sets;

  // First pass: provisional labels from the already-visited neighbours.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      int label = -1;
      auto visit = [&](int nx, int ny) {
        if (!labels.contains(nx, ny)) return;
        int other = labels.at(nx, ny);
        if (other < 0) return;
        if (label < 0) {
          label = other;
        } else {
          sets.unite(label, other);
        }
      };
      visit(x - 1, y);
      visit(x, y - 1);
      if (connectivity == Connectivity::kEight) {
        visit(x - 1, y - 1);
        visit(x + 1, y - 1);
      }
      labels.at(x, y) = label >= 0 ? label : sets.make();
    }
  }

  // Second pass: resolve roots, number regions by first appearance.
  std::vector<int> region_of_root;
  std::vector<std::vector<PixelCoord>> members;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int label = labels.at(x, y);
      if (label < 0) continue;
      int root = sets.find(label);
      if (static_cast<std::size_t>(root) >= region_of_root.size()) {
        region_of_root.resize(root + 1, -1);
      }
      if (region_of_root[root] < 0) {
        region_of_root[root] = static_cast<int>(members.size());
        members.emplace_back();
      }
      members[region_of_root[root]].push_back({x, y});
    }
  }

  std::vector<ConnectedRegion> regions;
  regions.reserve(members.size());
  for (auto& m : members) regions.push_back(make_region(std::move(m)));
  return regions;
}

RasterImage downsample(RasterImage const& img, int factor) {
  if (factor <= 0) throw_invalid("downsample factor must be >= 1");
  if (factor == 1) return img;
  int const ow = (img.width() + factor - 1) / factor;
  int const oh = (img.height() + factor - 1) / factor;
  RasterImage out(img.id(), ow, oh, img.gsd_cm() * factor, img.acquired_at());
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      int const x0 = ox * factor, y0 = oy * factor;
      int const x1 = std::min(x0 + factor, img.width());
      int const y1 = std::min(y0 + factor, img.height());
      int sum[3] = {0, 0, 0};
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          for (int c = 0; c < 3; ++c) sum[c] += img.channel(x, y, c);
        }
      }
      int const n = (x1 - x0) * (y1 - y0);
      // Round half up on the exact integer mean.
      auto mean = [n](int s) {
        return static_cast<std::uint8_t>((2 * s + n) / (2 * n));
      };
      out.set_pixel(ox, oy, {mean(sum[0]), mean(sum[1]), mean(sum[2])});
    }
  }
  return out;
}

Point2d to_native(Point2d p, int factor) {
  double const shift = (factor - 1) / 2.0;
  return {p.x * factor + shift, p.y * factor + shift};
}

Point2d from_native(Point2d p, int factor) {
  double const shift = (factor - 1) / 2.0;
  return {(p.x - shift) / factor, (p.y - shift) / factor};
}

}  // namespace savanna
