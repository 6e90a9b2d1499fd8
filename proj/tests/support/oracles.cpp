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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stack>

namespace savanna::oracle {

RasterImage random_image(int width, int height, std::uint64_t seed, std::string id) {
  RasterImage img(std::move(id), width, height, 4.0);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      img.set_pixel(x, y, {static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)),
                           static_cast<std::uint8_t>(d(rng))});
    }
  }
  return img;
}

BinaryMask random_mask(int width, int height, double density, std::uint64_t seed) {
  BinaryMask m(width, height);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution d(density);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) m.at(x, y) = d(rng) ? 1 : 0;
  }
  return m;
}

Grid<int> flood_fill_labels(BinaryMask const& mask, Connectivity connectivity, int* count) {
  Grid<int> label(mask.width(), mask.height(), -1);
  int next = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y) || label.at(x, y) >= 0) continue;
      std::stack<PixelCoord> todo;
      todo.push({x, y});
      label.at(x, y) = next;
      while (!todo.empty()) {
        auto p = todo.top();
        todo.pop();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (connectivity == Connectivity::kFour && dx != 0 && dy != 0) continue;
            int nx = p.x + dx, ny = p.y + dy;
            if (!mask.contains(nx, ny) || !mask.at(nx, ny) || label.at(nx, ny) >= 0) continue;
            label.at(nx, ny) = next;
            todo.push({nx, ny});
          }
        }
      }
      ++next;
    }
  }
  if (count) *count = next;
  return label;
}

ScalarMap value_max(RasterImage const& img) {
  ScalarMap out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      auto p = img.pixel(x, y);
      out.at(x, y) = std::max({p.r, p.g, p.b});
    }
  }
  return out;
}

ScalarMap sobel_naive(RasterImage const& img) {
  static int const kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static int const ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  ScalarMap out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double gx = 0, gy = 0;
      for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
          int sx = std::clamp(x + i - 1, 0, img.width() - 1);
          int sy = std::clamp(y + j - 1, 0, img.height() - 1);
          double b = img.pixel(sx, sy).b;
          gx += kx[j][i] * b;
          gy += ky[j][i] * b;
        }
      }
      out.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

RasterImage block_average(RasterImage const& img, int factor) {
  int ow = static_cast<int>(std::ceil(img.width() / static_cast<double>(factor)));
  int oh = static_cast<int>(std::ceil(img.height() / static_cast<double>(factor)));
  RasterImage out(img.id(), ow, oh, img.gsd_cm() * factor, img.acquired_at());
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double sum[3] = {0, 0, 0};
      int n = 0;
      for (int y = oy * factor; y < (oy + 1) * factor; ++y) {
        for (int x = ox * factor; x < (ox + 1) * factor; ++x) {
          if (!img.contains(x, y)) continue;
          auto p = img.pixel(x, y);
          sum[0] += p.r;
          sum[1] += p.g;
          sum[2] += p.b;
          ++n;
        }
      }
      auto r = [n](double s) { return static_cast<std::uint8_t>(std::floor(s / n + 0.5)); };
      out.set_pixel(ox, oy, {r(sum[0]), r(sum[1]), r(sum[2])});
    }
  }
  return out;
}

bool point_in_polygon(std::span<Point2d const> poly, Point2d p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    auto const& a = poly[i];
    auto const& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xc) inside = !inside;
    }
  }
  return inside;
}

std::vector<double> hoc_counts(RasterImage const& img, PixelCoord center, int window, int bins) {
  std::vector<double> h(static_cast<std::size_t>(3 * bins), 0.0);
  double width = 256.0 / bins;
  for (int y = center.y - window / 2; y <= center.y + window / 2; ++y) {
    for (int x = center.x - window / 2; x <= center.x + window / 2; ++x) {
      auto p = img.pixel(std::clamp(x, 0, img.width() - 1), std::clamp(y, 0, img.height() - 1));
      int v[3] = {p.r, p.g, p.b};
      for (int c = 0; c < 3; ++c) {
        int bin = 0;
        while (bin + 1 < bins && v[c] >= (bin + 1) * width) ++bin;
        h[static_cast<std::size_t>(c * bins + bin)] += 1;
      }
    }
  }
  return h;
}

std::vector<double> bovw_counts(Grid<int> const& words, PixelCoord center, int window, int k) {
  std::vector<double> h(static_cast<std::size_t>(k), 0.0);
  for (int y = center.y - window / 2; y <= center.y + window / 2; ++y) {
    for (int x = center.x - window / 2; x <= center.x + window / 2; ++x) {
      h[static_cast<std::size_t>(words.at(std::clamp(x, 0, words.width() - 1),
                                          std::clamp(y, 0, words.height() - 1)))] += 1;
    }
  }
  return h;
}

Grid<int> nearest_words(RasterImage const& img, Matrix const& centers, int window) {
  Grid<int> out(img.width(), img.height());
  int half = window / 2;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index k = 0; k < centers.rows(); ++k) {
        double d = 0;
        for (int c = 0; c < 3; ++c) {
          for (int dy = 0; dy < window; ++dy) {
            for (int dx = 0; dx < window; ++dx) {
              int sx = std::clamp(x - half + dx, 0, img.width() - 1);
              int sy = std::clamp(y - half + dy, 0, img.height() - 1);
              double diff = img.channel(sx, sy, c) - centers(k, c * window * window + dy * window + dx);
              d += diff * diff;
            }
          }
        }
        if (d < best) {
          best = d;
          arg = static_cast<int>(k);
        }
      }
      out.at(x, y) = arg;
    }
  }
  return out;
}

std::pair<double, std::vector<int>> best_two_partition(Matrix const& points) {
  auto n = static_cast<int>(points.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> arg;
  // Point 0 is pinned to cluster 0 to skip mirrored labellings.
  for (std::uint32_t bits = 0; bits < (1u << (n - 1)); ++bits) {
    std::vector<int> lab(static_cast<std::size_t>(n), 0);
    for (int i = 1; i < n; ++i) lab[static_cast<std::size_t>(i)] = (bits >> (i - 1)) & 1;
    double sse = 0;
    bool empty = false;
    for (int c = 0; c < 2; ++c) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(points.cols());
      int m = 0;
      for (int i = 0; i < n; ++i) {
        if (lab[static_cast<std::size_t>(i)] == c) {
          mean += points.row(i);
          ++m;
        }
      }
      if (m == 0) {
        empty = true;
        break;
      }
      mean /= m;
      for (int i = 0; i < n; ++i) {
        if (lab[static_cast<std::size_t>(i)] == c) sse += (points.row(i) - mean).squaredNorm();
      }
    }
    if (!empty && sse < best) {
      best = sse;
      arg = lab;
    }
  }
  return {best, arg};
}

double svm_primal(Vector const& w, double b, Matrix const& x, std::span<int const> y, double c,
                  ClassWeights weights) {
  double loss = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double yi = y[static_cast<std::size_t>(i)];
    double margin = yi * (x.row(i).dot(w) + b);
    double wt = yi > 0 ? weights.positive : weights.negative;
    loss += wt * std::max(0.0, 1.0 - margin);
  }
  return 0.5 * w.squaredNorm() + c * loss;
}

BruteSvm svm_grid_search(Matrix const& x, std::span<int const> y, double c, ClassWeights weights) {
  auto d = static_cast<int>(x.cols());
  int const dims = d + 1;
  // Objective at zero bounds the optimum: 0.5|w|^2 <= f(0) gives the box.
  double f0 = svm_primal(Vector::Zero(d), 0.0, x, y, c, weights);
  double radius = std::sqrt(2.0 * f0) + 1.0;
  double bias_radius = radius * (x.cwiseAbs().maxCoeff() + 1.0) + 1.0;
  std::vector<double> center(static_cast<std::size_t>(dims), 0.0);
  std::vector<double> span(static_cast<std::size_t>(dims), radius);
  span.back() = bias_radius;
  int const steps = dims <= 3 ? 20 : 8;
  auto eval = [&](std::vector<double> const& p) {
    Vector w(d);
    for (int j = 0; j < d; ++j) w[j] = p[static_cast<std::size_t>(j)];
    return svm_primal(w, p.back(), x, y, c, weights);
  };
  double best = eval(center);
  for (int round = 0; round < 60; ++round) {
    std::vector<double> arg = center;
    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    // Full tensor grid of (2*steps+1)^dims points around the center.
    while (true) {
      std::vector<double> p(static_cast<std::size_t>(dims));
      for (int j = 0; j < dims; ++j) {
        auto u = static_cast<std::size_t>(j);
        p[u] = center[u] + span[u] * (idx[u] - steps) / steps;
      }
      double f = eval(p);
      if (f < best) {
        best = f;
        arg = p;
      }
      int j = 0;
      while (j < dims && ++idx[static_cast<std::size_t>(j)] > 2 * steps) idx[static_cast<std::size_t>(j++)] = 0;
      if (j == dims) break;
    }
    center = arg;
    for (auto& s : span) s *= 0.5;
  }
  BruteSvm out;
  out.objective = best;
  out.w = Vector(d);
  for (int j = 0; j < d; ++j) out.w[j] = center[static_cast<std::size_t>(j)];
  out.b = center.back();
  return out;
}

namespace {

template <typename F>
std::vector<CurvePoint> enumerate(std::span<ScoredExample const> scored, F point) {
  std::vector<double> thresholds;
  for (auto const& e : scored) thresholds.push_back(e.score);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double pos = 0, neg = 0;
  for (auto const& e : scored) (e.animal ? pos : neg) += 1;
  std::vector<CurvePoint> out;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (auto const& e : scored) {
      if (e.score >= t) (e.animal ? tp : fp) += 1;
    }
    out.push_back(point(t, tp, fp, pos, neg));
  }
  return out;
}

}  // namespace

std::vector<CurvePoint> enumerate_pr(std::span<ScoredExample const> scored) {
  auto inner = enumerate(scored, [](double t, double tp, double fp, double pos, double) {
    return CurvePoint{t, tp / pos, tp / (tp + fp)};
  });
  double pos = 0;
  for (auto const& e : scored) pos += e.animal;
  std::vector<CurvePoint> out{{std::numeric_limits<double>::infinity(), 0.0, inner.front().y}};
  out.insert(out.end(), inner.begin(), inner.end());
  out.push_back({-std::numeric_limits<double>::infinity(), 1.0, pos / scored.size()});
  return out;
}

std::vector<CurvePoint> enumerate_roc(std::span<ScoredExample const> scored) {
  auto inner = enumerate(scored, [](double t, double tp, double fp, double pos, double neg) {
    return CurvePoint{t, fp / neg, tp / pos};
  });
  std::vector<CurvePoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  out.insert(out.end(), inner.begin(), inner.end());
  out.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  return out;
}

}  // namespace savanna::oracle
