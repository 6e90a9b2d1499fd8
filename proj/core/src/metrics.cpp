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

#include "savanna/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "savanna/error.hpp"

namespace savanna {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Step {
  double threshold;
  double tp;
  double fp;
};

// Cumulative counts after admitting each distinct score, highest first.
std::vector<Step> cumulative_steps(std::span<ScoredExample const> scored,
                                   double& positives, double& negatives) {
  std::vector<std::pair<double, bool>> s;
  s.reserve(scored.size());
  positives = negatives = 0;
  for (auto const& e : scored) {
    if (!std::isfinite(e.score)) throw_invalid("non-finite score", e.proposal_id);
    s.emplace_back(e.score, e.animal);
    (e.animal ? positives : negatives) += 1;
  }
  if (positives == 0 || negatives == 0) {
    throw_invalid("curves need both labels present");
  }
  std::sort(s.begin(), s.end(),
            [](auto const& a, auto const& b) { return a.first > b.first; });
  std::vector<Step> steps;
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < s.size();) {
    double t = s[i].first;
    for (; i < s.size() && s[i].first == t; ++i) (s[i].second ? tp : fp) += 1;
    steps.push_back({t, tp, fp});
  }
  return steps;
}

}  // namespace

std::string_view to_string(CurveKind kind) {
  return kind == CurveKind::kRoc ? "roc" : "pr";
}

Curve roc_curve(std::span<ScoredExample const> scored) {
  double p = 0, n = 0;
  auto steps = cumulative_steps(scored, p, n);
  Curve c{CurveKind::kRoc, {}, 0.0};
  c.points.push_back({kInf, 0.0, 0.0});
  for (auto const& s : steps) c.points.push_back({s.threshold, s.fp / n, s.tp / p});
  c.points.push_back({-kInf, 1.0, 1.0});
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    auto const& a = c.points[i - 1];
    auto const& b = c.points[i];
    c.auc += (b.x - a.x) * (a.y + b.y) / 2.0;
  }
  return c;
}

Curve pr_curve(std::span<ScoredExample const> scored) {
  double p = 0, n = 0;
  auto steps = cumulative_steps(scored, p, n);
  Curve c{CurveKind::kPr, {}, 0.0};
  // The empty-detection sentinel takes the precision of the first step.
  c.points.push_back({kInf, 0.0, steps.front().tp / (steps.front().tp + steps.front().fp)});
  for (auto const& s : steps) {
    c.points.push_back({s.threshold, s.tp / p, s.tp / (s.tp + s.fp)});
  }
  c.points.push_back({-kInf, 1.0, p / (p + n)});
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    c.auc += (c.points[i].x - c.points[i - 1].x) * c.points[i].y;
  }
  return c;
}

double interpolate_at(Curve const& curve, double x) {
  auto const& pts = curve.points;
  if (pts.empty()) throw_invalid("empty curve");
  // Last point with abscissa <= x; at vertical jumps that is the highest.
  std::size_t lo = 0;
  bool found = false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].x <= x) {
      lo = i;
      found = true;
    }
  }
  if (!found) return pts.front().y;
  for (std::size_t i = lo + 1; i < pts.size(); ++i) {
    if (pts[i].x > x) {
      double t = (x - pts[lo].x) / (pts[i].x - pts[lo].x);
      return pts[lo].y + t * (pts[i].y - pts[lo].y);
    }
  }
  return pts[lo].y;
}

std::vector<double> unit_grid(int n) {
  if (n < 2) throw_invalid("grid needs at least two points");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
  return g;
}

Curve average_curves(std::span<Curve const> curves, std::span<double const> grid) {
  if (curves.empty()) throw_invalid("nothing to average");
  if (grid.empty()) throw_invalid("empty grid");
  for (auto const& c : curves) {
    if (c.kind != curves.front().kind) throw_invalid("cannot average mixed curve kinds");
  }
  Curve out{curves.front().kind, {}, 0.0};
  for (double x : grid) {
    double sum = 0.0;
    for (auto const& c : curves) sum += interpolate_at(c, x);
    out.points.push_back({std::numeric_limits<double>::quiet_NaN(), x,
                          sum / static_cast<double>(curves.size())});
  }
  for (auto const& c : curves) out.auc += c.auc;
  out.auc /= static_cast<double>(curves.size());
  return out;
}

double interpolated_precision(Curve const& pr, double recall) {
  if (pr.kind != CurveKind::kPr) throw_invalid("expected a PR curve");
  double best = 0.0;
  for (auto const& p : pr.points) {
    if (p.x >= recall) best = std::max(best, p.y);
  }
  return best;
}

double recall_at_precision(Curve const& pr, double precision) {
  if (pr.kind != CurveKind::kPr) throw_invalid("expected a PR curve");
  double best = 0.0;
  for (auto const& p : pr.points) {
    if (p.y >= precision && std::isfinite(p.threshold)) best = std::max(best, p.x);
  }
  return best;
}

std::string curve_to_csv(Curve const& c) {
  std::ostringstream out;
  out << std::setprecision(17) << "threshold,x,y\n";
  for (auto const& p : c.points) {
    if (std::isinf(p.threshold)) {
      out << (p.threshold > 0 ? "inf" : "-inf");
    } else if (!std::isnan(p.threshold)) {
      out << p.threshold;
    }
    out << ',' << p.x << ',' << p.y << '\n';
  }
  return out.str();
}

}  // namespace savanna
