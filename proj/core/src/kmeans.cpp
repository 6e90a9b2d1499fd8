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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "savanna/error.hpp"
#include "savanna/features.hpp"

namespace savanna {
namespace {

constexpr Eigen::Index kBlockRows = 2048;

double exact_sq_distance(Eigen::Ref<Vector const> const& a,
                         Eigen::Ref<Vector const> const& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest center per row through the ||x||^2 - 2 x.c + ||c||^2 expansion.
// Returns the best and runner-up expanded distances alongside the index.
void assign_expanded(Matrix const& x, Matrix const& centers,
                     std::vector<int>& best, std::vector<double>& best_d,
                     std::vector<double>& second_d) {
  Eigen::Index const n = x.rows();
  Vector cnorm = centers.rowwise().squaredNorm();
  best.assign(static_cast<std::size_t>(n), 0);
  best_d.assign(static_cast<std::size_t>(n), 0.0);
  second_d.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index start = 0; start < n; start += kBlockRows) {
    Eigen::Index rows = std::min(kBlockRows, n - start);
    auto block = x.middleRows(start, rows);
    Matrix dots = block * centers.transpose();
    Vector xnorm = block.rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < rows; ++i) {
      double b1 = std::numeric_limits<double>::infinity();
      double b2 = b1;
      int idx = 0;
      for (Eigen::Index j = 0; j < centers.rows(); ++j) {
        double d = xnorm[i] - 2.0 * dots(i, j) + cnorm[j];
        if (d < b1) {
          b2 = b1;
          b1 = d;
          idx = static_cast<int>(j);
        } else if (d < b2) {
          b2 = d;
        }
      }
      auto r = static_cast<std::size_t>(start + i);
      best[r] = idx;
      best_d[r] = b1;
      second_d[r] = b2;
    }
  }
}

}  // namespace

std::vector<int> nearest_centers(Matrix const& rows, Codebook const& codebook) {
  if (rows.cols() != codebook.centers.cols()) {
    throw_invalid("row dimension does not match codebook");
  }
  std::vector<int> best;
  std::vector<double> b1, b2;
  assign_expanded(rows, codebook.centers, best, b1, b2);
  double const scale =
      rows.rowwise().squaredNorm().maxCoeff() +
      codebook.centers.rowwise().squaredNorm().maxCoeff();
  double const eps = 1e-9 * scale + 1e-9;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    auto r = static_cast<std::size_t>(i);
    if (b2[r] - b1[r] > eps) continue;
    // Near tie: settle it with exact sums, lowest index on equality.
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < codebook.centers.rows(); ++j) {
      double d = exact_sq_distance(rows.row(i).transpose(),
                                   codebook.centers.row(j).transpose());
      if (d < bd) {
        bd = d;
        best[r] = static_cast<int>(j);
      }
    }
  }
  return best;
}

Codebook train_codebook(Matrix const& x, KMeansConfig const& cfg) {
  Eigen::Index const n = x.rows();
  if (cfg.k < 1) throw_invalid("k must be >= 1");
  if (n < cfg.k) {
    throw_invalid("fewer patches than clusters",
                  std::to_string(n) + " < " + std::to_string(cfg.k));
  }
  if (cfg.max_iter < 1) throw_invalid("max_iter must be >= 1");

  std::mt19937_64 rng(cfg.seed);
  Matrix centers(cfg.k, x.cols());

  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = x.row(first(rng));
  Vector nearest(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    nearest[i] = exact_sq_distance(x.row(i).transpose(), centers.row(0).transpose());
  }
  for (int c = 1; c < cfg.k; ++c) {
    double total = nearest.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest[i];
        if (acc > r && nearest[i] > 0.0) {
          chosen = i;
          break;
        }
      }
      while (nearest[chosen] == 0.0 && chosen > 0) --chosen;
    } else {
      chosen = first(rng);
    }
    centers.row(c) = x.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest[i] = std::min(
          nearest[i],
          exact_sq_distance(x.row(i).transpose(), centers.row(c).transpose()));
    }
  }

  Codebook cb;
  cb.k = cfg.k;
  cb.dim = static_cast<int>(x.cols());
  cb.seed = cfg.seed;

  std::vector<int> assign;
  std::vector<double> b1, b2;
  Vector point_dist(n);
  for (int iter = 1;; ++iter) {
    assign_expanded(x, centers, assign, b1, b2);
    double distortion = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      point_dist[i] = exact_sq_distance(
          x.row(i).transpose(), centers.row(assign[static_cast<std::size_t>(i)]).transpose());
      distortion += point_dist[i];
    }
    double previous = cb.distortion_history.empty()
                          ? std::numeric_limits<double>::infinity()
                          : cb.distortion_history.back();
    cb.distortion_history.push_back(distortion);
    cb.iterations_run = iter;
    cb.distortion = distortion;
    bool converged = std::isfinite(previous) &&
                     (previous <= 0.0 ||
                      (previous - distortion) / previous < cfg.tol);
    if (converged || distortion == 0.0 || iter >= cfg.max_iter) break;

    // Update step.
    Matrix sums = Matrix::Zero(cfg.k, x.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(cfg.k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto a = assign[static_cast<std::size_t>(i)];
      sums.row(a) += x.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (int c = 0; c < cfg.k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: move it onto the worst-served point.
      Eigen::Index far = 0;
      point_dist.maxCoeff(&far);
      centers.row(c) = x.row(far);
      point_dist[far] = 0.0;
    }
  }
  cb.centers = std::move(centers);
  return cb;
}

}  // namespace savanna
