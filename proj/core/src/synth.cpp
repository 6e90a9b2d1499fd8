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

#include "savanna/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "savanna/error.hpp"

namespace savanna {
namespace {

using Rng = std::mt19937_64;
constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Color {
  double r, g, b;
  Color operator*(double s) const { return {r * s, g * s, b * s}; }
  Color operator+(Color o) const { return {r + o.r, g + o.g, b + o.b}; }
};

Color mix(Color a, Color b, double t) { return a * (1.0 - t) + b * t; }

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h) {}
  int width() const { return w_; }
  int height() const { return h_; }
  Color& at(int x, int y) { return px_[static_cast<std::size_t>(y) * w_ + x]; }

  RasterImage to_image(std::string id, double gsd, Timestamp t) const {
    RasterImage img(std::move(id), w_, h_, gsd, std::move(t));
    auto q = [](double v) {
      return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    };
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        Color c = px_[static_cast<std::size_t>(y) * w_ + x];
        img.set_pixel(x, y, {q(c.r), q(c.g), q(c.b)});
      }
    }
    return img;
  }

 private:
  int w_, h_;
  std::vector<Color> px_;
};

// Lattice value noise in [-1, 1] with smoothstep interpolation.
class ValueNoise {
 public:
  ValueNoise(int w, int h, double cell, Rng& rng)
      : cell_(std::max(cell, 1.0)),
        gw_(static_cast<int>(w / cell_) + 2),
        gh_(static_cast<int>(h / cell_) + 2),
        v_(static_cast<std::size_t>(gw_) * gh_) {
    for (auto& v : v_) v = uniform(rng, -1.0, 1.0);
  }

  double operator()(double x, double y) const {
    double fx = x / cell_, fy = y / cell_;
    int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
    double tx = smooth(fx - ix), ty = smooth(fy - iy);
    double a = lat(ix, iy), b = lat(ix + 1, iy);
    double c = lat(ix, iy + 1), d = lat(ix + 1, iy + 1);
    return (a + (b - a) * tx) * (1 - ty) + (c + (d - c) * tx) * ty;
  }

 private:
  static double smooth(double t) { return t * t * (3 - 2 * t); }
  double lat(int x, int y) const {
    return v_[static_cast<std::size_t>(std::min(y, gh_ - 1)) * gw_ + std::min(x, gw_ - 1)];
  }
  double cell_;
  int gw_, gh_;
  std::vector<double> v_;
};

// Rotated ellipse in pixel-index coordinates.
struct Ellipse {
  double cx, cy, a, b, theta;

  // Body frame: u along the major axis, v across it.
  void local(double x, double y, double& u, double& v) const {
    double dx = x - cx, dy = y - cy;
    double c = std::cos(theta), s = std::sin(theta);
    u = dx * c + dy * s;
    v = -dx * s + dy * c;
  }
  double level(double x, double y) const {
    double u, v;
    local(x, y, u, v);
    return (u / a) * (u / a) + (v / b) * (v / b);
  }
  bool contains(double x, double y) const { return level(x, y) <= 1.0; }
  double radius() const { return std::max(a, b); }
  Ellipse shifted(double dx, double dy) const { return {cx + dx, cy + dy, a, b, theta}; }
};

template <typename F>
void for_each_pixel(Canvas& canvas, Ellipse const& e, F&& f) {
  int r = static_cast<int>(std::ceil(e.radius())) + 1;
  int x0 = std::max(0, static_cast<int>(e.cx) - r), x1 = std::min(canvas.width() - 1, static_cast<int>(e.cx) + r);
  int y0 = std::max(0, static_cast<int>(e.cy) - r), y1 = std::min(canvas.height() - 1, static_cast<int>(e.cy) + r);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (e.contains(x, y)) f(x, y);
    }
  }
}

enum class Species { kWildebeest, kSpringbok, kZebra, kOryx };

struct Animal {
  Species species;
  Ellipse body;
  Ellipse head;
};

struct Occupied {
  double x, y, r;
};

bool free_spot(std::vector<Occupied> const& occ, double x, double y, double r,
               double gap) {
  for (auto const& o : occ) {
    if (std::hypot(o.x - x, o.y - y) < o.r + r + gap) return false;
  }
  return true;
}

// Coat colour at body-frame position (u, v) in centimetres; un, vn are the
// same normalized by the semi-axes.
Color coat(Species s, double u_cm, double un, double vn, Rng& rng) {
  std::normal_distribution<double> fur(0.0, 7.0);
  double n = fur(rng);
  Color c{0, 0, 0};
  switch (s) {
    case Species::kWildebeest:
      c = mix(Color{92, 82, 72}, Color{58, 50, 44}, std::clamp(un, 0.0, 1.0));
      if (std::abs(std::sin(u_cm * 2 * kPi / 22.0)) > 0.85) c = c * 0.8;
      break;
    case Species::kSpringbok:
      if (std::abs(vn) > 0.6) {
        c = {232, 226, 214};
      } else if (std::abs(vn) > 0.42) {
        c = {78, 50, 34};
      } else {
        c = {178, 120, 74};
      }
      break;
    case Species::kZebra:
      c = std::sin(u_cm * 2 * kPi / 16.0 + 0.6 * std::abs(vn)) > 0
              ? Color{234, 232, 226}
              : Color{36, 33, 31};
      break;
    case Species::kOryx:
      if (std::abs(vn) < 0.14) {
        c = {52, 46, 40};
      } else if (std::abs(vn) > 0.75) {
        c = {236, 234, 228};
      } else {
        c = {182, 170, 154};
      }
      break;
  }
  return c + Color{n, n, n};
}

Color head_coat(Species s, double un) {
  switch (s) {
    case Species::kWildebeest:
      return {40, 36, 34};
    case Species::kSpringbok:
      return un > 0.2 ? Color{236, 232, 224} : Color{120, 80, 52};
    case Species::kZebra:
      return {60, 56, 52};
    case Species::kOryx:
      return un > 0.0 ? Color{30, 28, 26} : Color{236, 234, 228};
  }
  return {0, 0, 0};
}

Timestamp make_timestamp(std::string const& date, bool morning, Rng& rng) {
  int start = morning ? (9 * 3600 + 13 * 60) : (13 * 3600 + 8 * 60);
  int span = morning ? 15 * 60 : 22 * 60;
  int t = start + static_cast<int>(uniform(rng, 0.0, span));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d", date.c_str(), t / 3600,
                (t / 60) % 60, t % 60);
  return Timestamp::parse(buf);
}

std::vector<Point2d> outline(Ellipse const& e, double scale, double jitter,
                             double cx_shift, double cy_shift, Rng& rng) {
  std::vector<Point2d> pts;
  int const n = 12;
  for (int k = 0; k < n; ++k) {
    double phi = 2 * kPi * k / n;
    double s = scale * (1.0 + uniform(rng, -jitter, jitter));
    double u = e.a * s * std::cos(phi), v = e.b * s * std::sin(phi);
    double c = std::cos(e.theta), sn = std::sin(e.theta);
    // Pixel (x, y) covers [x, x+1): centers sit at +0.5.
    pts.push_back({e.cx + cx_shift + u * c - v * sn + 0.5,
                   e.cy + cy_shift + u * sn + v * c + 0.5});
  }
  return pts;
}

struct Scene {
  RasterImage image;
  std::vector<GroundTruthObject> animals;
  PolygonDocument annotations;
};

Scene render(SynthParams const& p, int index, int animal_count) {
  std::seed_seq seq{p.seed, static_cast<std::uint64_t>(index), std::uint64_t{0x5a7a}};
  Rng rng(seq);
  double const cm = 1.0 / p.gsd_cm;  // pixels per centimetre
  int const w = p.width, h = p.height;
  Canvas canvas(w, h);

  char id_buf[32];
  std::snprintf(id_buf, sizeof id_buf, "synth_%04d", index);
  std::string const image_id = id_buf;
  bool const morning = index % 2 == 0;
  Timestamp when = make_timestamp(p.date, morning, rng);

  // Ground: pale sand with two noise octaves, drier yellow patches and a
  // little per-pixel grain.
  double const tex = p.texture_scale_cm * cm;
  ValueNoise coarse(w, h, tex, rng), fine(w, h, tex / 4.0, rng),
      patches(w, h, tex * 1.5, rng);
  std::normal_distribution<double> grain(0.0, 4.0);
  Color const sand{206, 186, 154}, dry{184, 172, 122};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double bright = 1.0 + 0.07 * coarse(x, y) + 0.035 * fine(x, y);
      double t = std::clamp((patches(x, y) - 0.35) * 2.0, 0.0, 0.7);
      double g = grain(rng);
      canvas.at(x, y) = mix(sand, dry, t) * bright + Color{g, g, g};
    }
  }

  // Sun: westward shadows in the morning, short and in any direction at
  // midday.
  double const sun = morning ? kPi + uniform(rng, -0.35, 0.35) : uniform(rng, 0.0, 2 * kPi);
  double const shadow_len =
      p.shadow_offset_cm * cm * (morning ? uniform(rng, 0.85, 1.15) : p.midday_shadow_fraction);
  double const sdx = std::cos(sun) * shadow_len, sdy = std::sin(sun) * shadow_len;
  auto cast_shadow = [&](Ellipse const& e) {
    for_each_pixel(canvas, e.shifted(sdx, sdy), [&](int x, int y) {
      canvas.at(x, y) = canvas.at(x, y) * p.shadow_darkness;
    });
  };

  std::vector<Occupied> occupied;
  auto place = [&](double r, double margin, double gap, double& x, double& y) {
    for (int attempt = 0; attempt < 500; ++attempt) {
      x = uniform(rng, margin, w - 1 - margin);
      y = uniform(rng, margin, h - 1 - margin);
      if (free_spot(occupied, x, y, r, gap)) {
        occupied.push_back({x, y, r});
        return true;
      }
    }
    return false;
  };

  // Animals first so confusers keep clear of them.
  std::vector<Animal> animals;
  for (int i = 0; i < animal_count; ++i) {
    double len = uniform(rng, p.animal_length_min_cm, p.animal_length_max_cm) * cm;
    double wid = uniform(rng, p.animal_width_min_cm, p.animal_width_max_cm) * cm;
    double a = 0.5 * len * 0.82, b = 0.5 * wid;
    double r = 0.5 * len + shadow_len;
    double x, y;
    if (!place(r, r + 2, 40.0 * cm, x, y)) {
      throw_invalid("scene too crowded to place every animal", image_id);
    }
    double theta = uniform(rng, 0.0, 2 * kPi);
    auto species = static_cast<Species>(std::uniform_int_distribution<int>(0, 3)(rng));
    double hx = x + std::cos(theta) * a * 1.02, hy = y + std::sin(theta) * a * 1.02;
    animals.push_back({species, {x, y, a, b, theta}, {hx, hy, 0.3 * a, 0.55 * b, theta}});
  }

  auto poisson = [&](double density) {
    double area_m2 = w * p.gsd_cm * h * p.gsd_cm / 1e4;
    return std::poisson_distribution<int>(density * area_m2 / 100.0)(rng);
  };
  double const clear_gap = 60.0 * cm;

  struct Blob {
    std::vector<Ellipse> parts;
    Color color;
    double speckle;
    bool shadow;
  };
  std::vector<Blob> blobs;

  for (int n = poisson(p.bush_density); n > 0; --n) {
    double r = uniform(rng, 50.0, 130.0) * cm, x, y;
    if (!place(r, 0, clear_gap, x, y)) continue;
    Blob bush{{}, Color{64, 80, 42} * uniform(rng, 0.85, 1.15), 16.0, true};
    int lobes = std::uniform_int_distribution<int>(3, 6)(rng);
    for (int k = 0; k < lobes; ++k) {
      double ang = uniform(rng, 0, 2 * kPi), d = uniform(rng, 0, 0.5) * r;
      double rr = uniform(rng, 0.35, 0.6) * r;
      bush.parts.push_back({x + std::cos(ang) * d, y + std::sin(ang) * d, rr, rr, 0.0});
    }
    blobs.push_back(std::move(bush));
  }
  for (int n = poisson(p.rock_density); n > 0; --n) {
    double a = uniform(rng, 25.0, 70.0) * cm, b = a * uniform(rng, 0.5, 0.9), x, y;
    if (!place(a, 0, clear_gap, x, y)) continue;
    blobs.push_back({{{x, y, a, b, uniform(rng, 0, kPi)}},
                     Color{152, 144, 130} * uniform(rng, 0.9, 1.1), 6.0, true});
  }
  for (int n = poisson(p.mound_density); n > 0; --n) {
    double a = uniform(rng, 35.0, 75.0) * cm, b = a * uniform(rng, 0.6, 0.95), x, y;
    if (!place(a, 0, clear_gap, x, y)) continue;
    blobs.push_back({{{x, y, a, b, uniform(rng, 0, kPi)}},
                     Color{170, 114, 78} * uniform(rng, 0.9, 1.1), 6.0, true});
  }
  for (int n = poisson(p.log_density); n > 0; --n) {
    double a = uniform(rng, 30.0, 75.0) * cm, b = uniform(rng, 5.0, 10.0) * cm, x, y;
    if (!place(a, 0, clear_gap, x, y)) continue;
    blobs.push_back({{{x, y, a, b, uniform(rng, 0, kPi)}},
                     Color{96, 74, 56} * uniform(rng, 0.8, 1.2), 10.0, true});
  }
  for (int n = poisson(p.tuft_density); n > 0; --n) {
    double r = uniform(rng, 6.0, 18.0) * cm, x, y;
    if (!place(r, 0, 10.0 * cm, x, y)) continue;
    blobs.push_back({{{x, y, r, r * uniform(rng, 0.6, 1.0), uniform(rng, 0, kPi)}},
                     Color{120, 116, 70} * uniform(rng, 0.6, 1.1), 14.0, true});
  }
  for (int n = poisson(p.hole_density); n > 0; --n) {
    double a = uniform(rng, 15.0, 32.0) * cm, b = a * uniform(rng, 0.6, 1.0), x, y;
    if (!place(a, 0, clear_gap, x, y)) continue;
    blobs.push_back({{{x, y, a, b, uniform(rng, 0, kPi)}},
                     Color{38, 30, 24} * uniform(rng, 0.8, 1.2), 5.0, false});
  }

  for (auto const& blob : blobs) {
    if (!blob.shadow) continue;
    // Union of the lobes' shadows, darkened once.
    for (auto const& e : blob.parts) {
      for_each_pixel(canvas, e.shifted(sdx, sdy), [&](int x, int y) {
        bool inside_other = false;
        for (auto const& o : blob.parts) {
          if (&o == &e) break;
          if (o.shifted(sdx, sdy).contains(x, y)) inside_other = true;
        }
        if (!inside_other) canvas.at(x, y) = canvas.at(x, y) * p.shadow_darkness;
      });
    }
  }
  for (auto const& a : animals) {
    cast_shadow(a.body);
    cast_shadow(a.head);
  }
  std::normal_distribution<double> speck(0.0, 1.0);
  for (auto const& blob : blobs) {
    for (auto const& e : blob.parts) {
      for_each_pixel(canvas, e, [&](int x, int y) {
        // Sun-facing side slightly brighter.
        double u, v;
        e.local(x, y, u, v);
        double facing = -(std::cos(sun) * (x - e.cx) + std::sin(sun) * (y - e.cy)) / e.radius();
        double n = speck(rng) * blob.speckle;
        canvas.at(x, y) = blob.color * (1.0 + 0.08 * facing) + Color{n, n, n};
      });
    }
  }

  Scene scene{canvas.to_image(image_id, p.gsd_cm, when), {}, {image_id, p.volunteers, {}}};
  // Animals are painted straight onto the quantized image so the pixel
  // sets recorded as ground truth match what is drawn.
  int gt_index = 0;
  std::bernoulli_distribution miss(p.volunteer_miss_rate);
  for (auto const& a : animals) {
    std::vector<PixelCoord> pixels;
    int r = static_cast<int>(std::ceil(a.body.a * 1.4)) + 2;
    for (int y = std::max(0, static_cast<int>(a.body.cy) - r);
         y <= std::min(h - 1, static_cast<int>(a.body.cy) + r); ++y) {
      for (int x = std::max(0, static_cast<int>(a.body.cx) - r);
           x <= std::min(w - 1, static_cast<int>(a.body.cx) + r); ++x) {
        Color c;
        if (a.body.contains(x, y)) {
          double u, v;
          a.body.local(x, y, u, v);
          c = coat(a.species, u * p.gsd_cm, u / a.body.a, v / a.body.b, rng);
        } else if (a.head.contains(x, y)) {
          double u, v;
          a.head.local(x, y, u, v);
          c = head_coat(a.species, u / a.head.a);
        } else {
          continue;
        }
        auto q = [](double val) {
          return static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
        };
        scene.image.set_pixel(x, y, {q(c.r), q(c.g), q(c.b)});
        pixels.push_back({x, y});
      }
    }

    GroundTruthObject obj;
    obj.object_id = image_id + "/gt" + std::to_string(gt_index++);
    obj.image_id = image_id;
    double sx = 0, sy = 0;
    for (auto const& px : pixels) {
      sx += px.x;
      sy += px.y;
    }
    obj.centroid = {sx / static_cast<double>(pixels.size()), sy / static_cast<double>(pixels.size())};
    obj.pixels = std::move(pixels);
    obj.verified = Verification::kConfirmed;
    obj.source = ObjectSource::kFusion;

    for (int v = 0; v < p.volunteers; ++v) {
      if (miss(rng)) continue;
      double jx = uniform(rng, -6.0, 6.0) * cm, jy = uniform(rng, -6.0, 6.0) * cm;
      Ellipse outline_shape = a.body;
      outline_shape.a *= 1.12;  // volunteers include the head
      scene.annotations.polygons.push_back(
          {image_id, "volunteer_" + std::to_string(v),
           outline(outline_shape, uniform(rng, 1.0, 1.12), 0.05, jx, jy, rng)});
      ++obj.supporting_volunteers;
    }
    scene.animals.push_back(std::move(obj));
  }
  if (!blobs.empty() && std::bernoulli_distribution(p.stray_polygon_rate)(rng)) {
    auto const& blob = blobs[std::uniform_int_distribution<std::size_t>(0, blobs.size() - 1)(rng)];
    int v = std::uniform_int_distribution<int>(0, std::max(0, p.volunteers - 1))(rng);
    scene.annotations.polygons.push_back(
        {image_id, "volunteer_" + std::to_string(v),
         outline(blob.parts.front(), 1.1, 0.05, 0, 0, rng)});
  }
  clamp_to_image(scene.annotations, w, h);
  return scene;
}

}  // namespace

void SynthParams::validate() const {
  if (image_count < 0 || empty_images < 0) throw_invalid("image counts must be >= 0");
  if (width < 32 || height < 32) throw_invalid("images must be at least 32x32");
  if (!(gsd_cm > 0)) throw_invalid("gsd_cm must be > 0");
  if (animals_per_image < 0) throw_invalid("animals_per_image must be >= 0");
  if (!(animal_length_min_cm > 0) || animal_length_max_cm < animal_length_min_cm ||
      !(animal_width_min_cm > 0) || animal_width_max_cm < animal_width_min_cm) {
    throw_invalid("animal size range is invalid");
  }
  double extent_px = (animal_length_max_cm + shadow_offset_cm) / gsd_cm + 4;
  if (extent_px >= std::min(width, height)) {
    throw_invalid("animal size exceeds the image",
                  std::to_string(extent_px) + " px needed");
  }
  if (shadow_offset_cm < 0 || midday_shadow_fraction < 0 || shadow_darkness < 0 ||
      shadow_darkness > 1) {
    throw_invalid("shadow parameters are invalid");
  }
  if (!(texture_scale_cm > 0)) throw_invalid("texture_scale_cm must be > 0");
  if (bush_density < 0 || hole_density < 0 || rock_density < 0 || mound_density < 0 ||
      log_density < 0 || tuft_density < 0) {
    throw_invalid("densities must be >= 0");
  }
  if (volunteers < 3) throw_invalid("need at least three volunteers");
  if (volunteer_miss_rate < 0 || volunteer_miss_rate > 1 || stray_polygon_rate < 0 ||
      stray_polygon_rate > 1) {
    throw_invalid("rates must be in [0, 1]");
  }
}

#define SAVANNA_SYNTH_FIELDS(X)                                                 \
  X(image_count) X(width) X(height) X(gsd_cm) X(animals_per_image)              \
  X(empty_images) X(animal_length_min_cm) X(animal_length_max_cm)               \
  X(animal_width_min_cm) X(animal_width_max_cm) X(shadow_offset_cm)             \
  X(midday_shadow_fraction) X(shadow_darkness) X(texture_scale_cm)              \
  X(bush_density) X(hole_density) X(rock_density) X(mound_density)             \
  X(log_density) X(tuft_density)              \
  X(volunteers) X(volunteer_miss_rate) X(stray_polygon_rate) X(date) X(seed)

std::string to_json(SynthParams const& p) {
  nlohmann::ordered_json j;
#define X(f) j[#f] = p.f;
  SAVANNA_SYNTH_FIELDS(X)
#undef X
  return j.dump(2);
}

SynthParams synth_params_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (nlohmann::json::exception const& e) {
    throw_invalid("synth parameters are not valid JSON", e.what());
  }
  if (!j.is_object()) throw_invalid("synth parameters must be a JSON object");
  SynthParams p;
  for (auto const& [key, value] : j.items()) {
    bool known = false;
    try {
#define X(f)                   \
  if (key == #f) {             \
    value.get_to(p.f);         \
    known = true;              \
  }
      SAVANNA_SYNTH_FIELDS(X)
#undef X
    } catch (nlohmann::json::exception const& e) {
      throw_invalid("bad value for synth parameter " + key, e.what());
    }
    if (!known) throw_invalid("unknown synth parameter", key);
  }
  p.validate();
  return p;
}

SynthDataset synth_generate(SynthParams const& params) {
  params.validate();
  SynthDataset out;
  int const total = params.image_count + params.empty_images;
  for (int i = 0; i < total; ++i) {
    Scene s = render(params, i, i < params.image_count ? params.animals_per_image : 0);
    out.images.push_back(std::move(s.image));
    for (auto& a : s.animals) out.ground_truth.push_back(std::move(a));
    out.annotations.push_back(std::move(s.annotations));
  }
  return out;
}

}  // namespace savanna
