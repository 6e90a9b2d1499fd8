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

#ifndef SAVANNA_RASTER_HPP_
#define SAVANNA_RASTER_HPP_

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace savanna {

/// Integer pixel index. Pixel (x, y) is the x-th column of the y-th row.
struct PixelCoord {
  int x = 0;
  int y = 0;
  friend auto operator<=>(PixelCoord const&, PixelCoord const&) = default;
};

/// Real-valued position in pixel-index units: (2.0, 3.0) is the center of
/// pixel (2, 3).
struct Point2d {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(Point2d const&, Point2d const&) = default;
};

double distance(Point2d a, Point2d b);

struct BoundingBox {
  int min_x = 0;
  int min_y = 0;
  int max_x = 0;
  int max_y = 0;
  bool contains(Point2d p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  friend bool operator==(BoundingBox const&, BoundingBox const&) = default;
};

/// Dense row-major grid. Used for scalar maps, masks and word maps.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width),
        height_(height),
        values_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& at(int x, int y) { return values_[index(x, y)]; }
  T const& at(int x, int y) const { return values_[index(x, y)]; }

  std::span<T> values() { return values_; }
  std::span<T const> values() const { return values_; }

  friend bool operator==(Grid const&, Grid const&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

using ScalarMap = Grid<double>;
using BinaryMask = Grid<std::uint8_t>;

/// Acquisition time as an ISO-8601 string ("2014-05-15T09:20:00") or a bare
/// time of day ("09:20", "09:20:00").
class Timestamp {
 public:
  static Timestamp parse(std::string text);
  std::string const& iso8601() const { return text_; }
  int second_of_day() const { return second_of_day_; }
  friend bool operator==(Timestamp const&, Timestamp const&) = default;

 private:
  std::string text_;
  int second_of_day_ = 0;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(Rgb const&, Rgb const&) = default;
};

/// 8-bit RGB image with its ground sampling distance.
class RasterImage {
 public:
  RasterImage(std::string image_id, int width, int height, double gsd_cm,
              std::optional<Timestamp> acquired_at = std::nullopt);

  std::string const& id() const { return id_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double gsd_cm() const { return gsd_cm_; }
  std::optional<Timestamp> const& acquired_at() const { return acquired_at_; }
  void set_acquired_at(std::optional<Timestamp> t) { acquired_at_ = std::move(t); }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool contains(Point2d p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_ - 1.0 &&
           p.y <= height_ - 1.0;
  }

  std::uint8_t channel(int x, int y, int c) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  /// Channel value with out-of-bounds coordinates clamped to the border.
  std::uint8_t clamped(int x, int y, int c) const;

  Rgb pixel(int x, int y) const;
  void set_pixel(int x, int y, Rgb value);

  /// Interleaved RGB bytes, row-major.
  std::span<std::uint8_t const> bytes() const { return pixels_; }
  std::span<std::uint8_t> bytes() { return pixels_; }

  friend bool operator==(RasterImage const&, RasterImage const&) = default;

 private:
  std::string id_;
  int width_;
  int height_;
  double gsd_cm_;
  std::optional<Timestamp> acquired_at_;
  std::vector<std::uint8_t> pixels_;
};

enum class Connectivity { kFour = 4, kEight = 8 };
enum class ThresholdDirection { kBelow, kAbove };

struct ConnectedRegion {
  /// Member pixels in scanline order.
  std::vector<PixelCoord> pixels;
  Point2d centroid;
  BoundingBox bbox;
  std::size_t area() const { return pixels.size(); }
};

/// HSV value channel: per-pixel max(R, G, B).
ScalarMap value_channel(RasterImage const& img);

/// 3x3 Sobel gradient magnitude of the blue channel, clamp-to-edge borders.
ScalarMap sobel_blue(RasterImage const& img);

/// Strict comparison: bit set iff value < t (kBelow) or value > t (kAbove).
BinaryMask threshold(ScalarMap const& map, double t,
                     ThresholdDirection direction);

/// Maximal connected regions of set bits, ordered by the scanline position
/// of each region's first pixel.
std::vector<ConnectedRegion> connected_components(
    BinaryMask const& mask, Connectivity connectivity = Connectivity::kEight);

/// Block-mean downsampling. Trailing partial blocks average the pixels they
/// have. The result's GSD is gsd_cm * factor.
RasterImage downsample(RasterImage const& img, int factor);

/// Maps a point between a native image and its factor-downsampled version.
Point2d to_native(Point2d p, int factor);
Point2d from_native(Point2d p, int factor);

/// Region bookkeeping shared by the components pass and fusion.
ConnectedRegion make_region(std::vector<PixelCoord> pixels);

}  // namespace savanna

#endif  // SAVANNA_RASTER_HPP_
