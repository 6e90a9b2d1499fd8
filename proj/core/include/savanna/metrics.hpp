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

#ifndef SAVANNA_METRICS_HPP_
#define SAVANNA_METRICS_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace savanna {

struct ScoredExample {
  std::string proposal_id;
  double score = 0.0;
  bool animal = false;
};

enum class CurveKind { kRoc, kPr };
std::string_view to_string(CurveKind kind);

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;  // FPR for ROC, recall for PR
  double y = 0.0;  // TPR for ROC, precision for PR
};

/// Points run from threshold +inf down to -inf; an example counts as
/// predicted animal when score >= threshold.
struct Curve {
  CurveKind kind = CurveKind::kRoc;
  std::vector<CurvePoint> points;
  /// Trapezoidal area for ROC, step-wise average precision for PR.
  double auc = 0.0;
};

Curve roc_curve(std::span<ScoredExample const> scored);

/// Precision at the +inf sentinel (no detections) repeats the precision of
/// the highest threshold so a constant scorer is flat at the base rate.
Curve pr_curve(std::span<ScoredExample const> scored);

/// Vertical averaging: each curve is linearly interpolated at every grid x
/// and the y values are averaged. At a vertical jump the upper value wins.
/// auc of the result is the mean of the inputs' auc.
Curve average_curves(std::span<Curve const> curves, std::span<double const> grid);

/// Evenly spaced grid 0, 1/(n-1), ..., 1.
std::vector<double> unit_grid(int n = 101);

/// y of the curve at x by linear interpolation (upper value at jumps).
double interpolate_at(Curve const& curve, double x);

/// Maximum precision over all points with recall >= r.
double interpolated_precision(Curve const& pr, double recall);

/// Largest recall among points whose precision is at least p; 0 if none.
double recall_at_precision(Curve const& pr, double precision);

/// CSV with header threshold,x,y.
std::string curve_to_csv(Curve const& c);

}  // namespace savanna

#endif  // SAVANNA_METRICS_HPP_
