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
#include <list>
#include <numeric>
#include <random>
#include <unordered_map>

#include "savanna/detector.hpp"
#include "savanna/error.hpp"
#include "svm_internal.hpp"

namespace savanna {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTau = 1e-12;
constexpr Eigen::Index kFullGramLimit = 2500;

void validate_problem(Matrix const& x, std::span<int const> y,
                      double c, ClassWeights weights) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw_invalid("label count does not match row count");
  }
  if (!(c > 0.0) || !std::isfinite(c)) throw_invalid("C must be > 0");
  if (!(weights.positive > 0.0) || !(weights.negative > 0.0)) {
    throw_invalid("class weights must be > 0");
  }
  bool has_pos = false, has_neg = false;
  for (int label : y) {
    if (label == 1) {
      has_pos = true;
    } else if (label == -1) {
      has_neg = true;
    } else {
      throw_invalid("labels must be +1 or -1");
    }
  }
  if (!has_pos || !has_neg) {
    throw_invalid("training data must contain both classes");
  }
  if (!x.allFinite()) throw_invalid("feature matrix has non-finite values");
}

// Kernel columns K(:, i) = X x_i, fully precomputed for small problems and
// LRU-cached otherwise.
class KernelColumns {
 public:
  explicit KernelColumns(Matrix const& x) : x_(x) {
    if (x.rows() <= kFullGramLimit) {
      gram_ = x * x.transpose();
      full_ = true;
    } else {
      std::size_t budget = std::size_t{256} << 20;  // bytes
      capacity_ = std::max<std::size_t>(
          2, budget / (sizeof(double) * static_cast<std::size_t>(x.rows())));
    }
    diag_ = x.rowwise().squaredNorm();
  }

  double diag(Eigen::Index i) const { return diag_[i]; }

  double const* column(Eigen::Index i) {
    if (full_) return gram_.data() + i * gram_.cols();
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second.data();
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    Vector col = x_ * x_.row(i).transpose();
    lru_.emplace_front(i, std::move(col));
    index_[i] = lru_.begin();
    return lru_.front().second.data();
  }

 private:
  Matrix const& x_;
  bool full_ = false;
  Matrix gram_;
  Vector diag_;
  std::size_t capacity_ = 0;
  std::list<std::pair<Eigen::Index, Vector>> lru_;
  std::unordered_map<Eigen::Index,
                     std::list<std::pair<Eigen::Index, Vector>>::iterator>
      index_;
};

LinearModel solve_smo(Matrix const& x, std::span<int const> labels,
                      SvmOptions const& opts) {
  Eigen::Index const n = x.rows();
  std::vector<double> y(labels.begin(), labels.end());
  std::vector<double> upper(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    upper[t] = opts.c * (y[t] > 0 ? opts.weights.positive : opts.weights.negative);
  }
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<double> grad(static_cast<std::size_t>(n), -1.0);
  KernelColumns kernel(x);
  std::vector<double> qi(static_cast<std::size_t>(n)), qj(static_cast<std::size_t>(n));

  auto is_upper = [&](Eigen::Index t) { return alpha[t] >= upper[t]; };
  auto is_lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };
  auto dual_objective = [&] {
    double f = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) f += alpha[t] * (grad[t] - 1.0);
    return 0.5 * f;
  };

  long long const max_iter =
      std::max<long long>(10000, static_cast<long long>(opts.max_epochs) * n);
  long long iter = 0;
  double last_objective = 0.0;
  for (; iter < max_iter; ++iter) {
    // Maximal violating i, then second-order j (Fan, Chen & Lin style).
    double gmax = -kInf;
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!is_upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = t;
        }
      } else if (!is_lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i = t;
      }
    }
    if (i < 0) break;
    double const* ki = kernel.column(i);
    for (Eigen::Index t = 0; t < n; ++t) qi[t] = y[i] * y[t] * ki[t];

    double gmax2 = -kInf, obj_min = kInf;
    Eigen::Index j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (is_lower(t)) continue;
        double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0) {
          double quad = kernel.diag(i) + kernel.diag(t) - 2.0 * y[i] * qi[t];
          double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= obj_min) {
            obj_min = obj;
            j = t;
          }
        }
      } else {
        if (is_upper(t)) continue;
        double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          double quad = kernel.diag(i) + kernel.diag(t) + 2.0 * y[i] * qi[t];
          double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= obj_min) {
            obj_min = obj;
            j = t;
          }
        }
      }
    }
    if (gmax + gmax2 < opts.kkt_tol || j < 0) break;

    double const* kj = kernel.column(j);
    // The cache may have evicted column i while fetching j; qi is a copy.
    for (Eigen::Index t = 0; t < n; ++t) qj[t] = y[j] * y[t] * kj[t];

    double const ci = upper[i], cj = upper[j];
    double const old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = kernel.diag(i) + kernel.diag(j) + 2.0 * qi[j];
      if (quad <= 0) quad = kTau;
      double delta = (-grad[i] - grad[j]) / quad;
      double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > ci - cj) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = ci - diff;
        }
      } else if (alpha[j] > cj) {
        alpha[j] = cj;
        alpha[i] = cj + diff;
      }
    } else {
      double quad = kernel.diag(i) + kernel.diag(j) - 2.0 * qi[j];
      if (quad <= 0) quad = kTau;
      double delta = (grad[i] - grad[j]) / quad;
      double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > ci) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = sum - ci;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > cj) {
        if (alpha[j] > cj) {
          alpha[j] = cj;
          alpha[i] = sum - cj;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    double const di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (Eigen::Index t = 0; t < n; ++t) grad[t] += qi[t] * di + qj[t] * dj;

    if ((iter + 1) % std::max<Eigen::Index>(n, 1) == 0) {
      double f = dual_objective();
      if (iter + 1 > n && std::abs(f - last_objective) <=
                              opts.tol * std::max(1.0, std::abs(f))) {
        ++iter;
        break;
      }
      last_objective = f;
    }
  }

  // Bias from the free multipliers, or the midpoint of the feasible band.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    double yg = y[t] * grad[t];
    if (is_upper(t)) {
      if (y[t] < 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (is_lower(t)) {
      if (y[t] > 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  double rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;

  LinearModel model;
  model.w = Vector::Zero(x.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] != 0.0) model.w += (alpha[t] * y[t]) * x.row(t).transpose();
  }
  model.b = -rho;
  model.c_value = opts.c;
  model.positive_weight = opts.weights.positive;
  model.negative_weight = opts.weights.negative;
  model.epochs = static_cast<int>(iter / std::max<Eigen::Index>(n, 1));
  if (!std::isfinite(model.b)) {
    model.b = optimal_bias(model.w, x, labels, opts.c, opts.weights);
  }
  return model;
}

}  // namespace

namespace detail {

// Exact reduction for a single example s of one class. With
// alpha_s = sum of the others' multipliers (the equality constraint) the
// dual becomes a box-constrained QP over z_i = x_s - x_i with linear term 2,
// valid whenever alpha_s's own bound cannot bind.
LinearModel solve_singleton(Matrix const& data, Eigen::Index singleton_row,
                            std::span<Eigen::Index const> other_rows,
                            double sign, double c_singleton, double c_other,
                            double kkt_tol, double tol, int max_epochs,
                            std::uint64_t seed) {
  Eigen::Index const d = data.cols();
  std::size_t const n = other_rows.size();
  Vector xs = data.row(singleton_row).transpose();
  double const xs_norm = xs.squaredNorm();
  std::vector<double> xs_dot(n), qdiag(n), alpha(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    auto row = data.row(other_rows[k]);
    xs_dot[k] = row.dot(xs);
    qdiag[k] = xs_norm - 2.0 * xs_dot[k] + row.squaredNorm();
  }

  Vector w = Vector::Zero(d);  // sum alpha_k (x_s - x_k)
  double w_dot_xs = 0.0;
  double const upper = c_other;
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), 0);
  std::size_t active_size = n;
  std::mt19937_64 rng(seed);
  double pg_max_old = kInf, pg_min_old = -kInf;
  double dual = 0.0, dual_at_epoch_start = 0.0;
  int epoch = 0;
  for (; epoch < max_epochs; ++epoch) {
    std::shuffle(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(active_size), rng);
    double pg_max = -kInf, pg_min = kInf;
    dual_at_epoch_start = dual;
    for (std::size_t s = 0; s < active_size; ++s) {
      std::size_t const k = active[s];
      auto row = data.row(other_rows[k]);
      double const g = w_dot_xs - w.dot(row.transpose()) - 2.0;
      double pg = 0.0;
      if (alpha[k] == 0.0) {
        if (g > pg_max_old) {
          --active_size;
          std::swap(active[s], active[active_size]);
          --s;
          continue;
        }
        if (g < 0) pg = g;
      } else if (alpha[k] == upper) {
        if (g < pg_min_old) {
          --active_size;
          std::swap(active[s], active[active_size]);
          --s;
          continue;
        }
        if (g > 0) pg = g;
      } else {
        pg = g;
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (std::abs(pg) <= 1e-12) continue;
      double const old = alpha[k];
      double next = qdiag[k] > 0.0 ? old - g / qdiag[k] : (g < 0 ? upper : 0.0);
      next = std::clamp(next, 0.0, upper);
      double const delta = next - old;
      if (delta == 0.0) continue;
      alpha[k] = next;
      w += delta * (xs - row.transpose());
      w_dot_xs += delta * (xs_norm - xs_dot[k]);
      dual += g * delta + 0.5 * qdiag[k] * delta * delta;
    }
    bool const gap_closed = pg_max - pg_min <= kkt_tol;
    bool const stalled =
        epoch > 0 && std::abs(dual - dual_at_epoch_start) <=
                         tol * std::max(1.0, std::abs(dual));
    if (gap_closed || stalled) {
      if (active_size == n) break;
      active_size = n;
      pg_max_old = kInf;
      pg_min_old = -kInf;
      continue;
    }
    pg_max_old = pg_max <= 0 ? kInf : pg_max;
    pg_min_old = pg_min >= 0 ? -kInf : pg_min;
  }

  double const alpha_s = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  LinearModel model;
  // In the singleton's own label frame w.x + b = +1 at x_s.
  model.w = w;
  if (alpha_s > 0.0 && alpha_s < c_singleton) {
    model.b = 1.0 - w_dot_xs;
  } else {
    // Degenerate (all multipliers zero): pick the primal-optimal bias.
    std::vector<int> y;
    Matrix sub(static_cast<Eigen::Index>(n + 1), d);
    sub.row(0) = xs.transpose();
    y.push_back(1);
    for (std::size_t k = 0; k < n; ++k) {
      sub.row(static_cast<Eigen::Index>(k + 1)) = data.row(other_rows[k]);
      y.push_back(-1);
    }
    model.b = optimal_bias(w, sub, y, 1.0, {c_singleton, c_other});
  }
  if (sign < 0) {
    model.w = -model.w;
    model.b = -model.b;
  }
  model.epochs = epoch;
  return model;
}

}  // namespace detail

double svm_objective(LinearModel const& model, Matrix const& x,
                     std::span<int const> y) {
  Vector scores = x * model.w;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double margin = y[static_cast<std::size_t>(i)] * (scores[i] + model.b);
    double weight = y[static_cast<std::size_t>(i)] > 0 ? model.positive_weight
                                                        : model.negative_weight;
    loss += weight * std::max(0.0, 1.0 - margin);
  }
  return 0.5 * model.w.squaredNorm() + model.c_value * loss;
}

double optimal_bias(Vector const& w, Matrix const& x, std::span<int const> y,
                    double c, ClassWeights weights) {
  // Each hinge term is convex piecewise linear in b with a kink at
  // y_i - w.x_i; walk the kinks until the slope turns non-negative.
  Vector scores = x * w;
  std::vector<std::pair<double, double>> kinks;  // (position, weight)
  double slope = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int label = y[static_cast<std::size_t>(i)];
    double u = c * (label > 0 ? weights.positive : weights.negative);
    kinks.emplace_back(label - scores[i], u);
    if (label > 0) slope -= u;
  }
  std::sort(kinks.begin(), kinks.end());
  for (std::size_t k = 0; k < kinks.size(); ++k) {
    slope += kinks[k].second;
    if (slope > 0) return kinks[k].first;
    if (slope == 0) {
      double next = k + 1 < kinks.size() ? kinks[k + 1].first : kinks[k].first;
      return 0.5 * (kinks[k].first + next);
    }
  }
  return kinks.empty() ? 0.0 : kinks.back().first;
}

LinearModel train_linear_svm(Matrix const& x, std::span<int const> y,
                             SvmOptions const& opts) {
  validate_problem(x, y, opts.c, opts.weights);
  std::vector<Eigen::Index> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) {
    (y[i] > 0 ? pos : neg).push_back(static_cast<Eigen::Index>(i));
  }
  double const cp = opts.c * opts.weights.positive;
  double const cn = opts.c * opts.weights.negative;
  LinearModel model;
  if (pos.size() == 1 && cp >= cn * static_cast<double>(neg.size())) {
    model = detail::solve_singleton(x, pos[0], neg, 1.0, cp, cn, opts.kkt_tol,
                                    opts.tol, opts.max_epochs, opts.seed);
  } else if (neg.size() == 1 && cn >= cp * static_cast<double>(pos.size())) {
    model = detail::solve_singleton(x, neg[0], pos, -1.0, cn, cp, opts.kkt_tol,
                                    opts.tol, opts.max_epochs, opts.seed);
  } else {
    model = solve_smo(x, y, opts);
  }
  model.c_value = opts.c;
  model.positive_weight = opts.weights.positive;
  model.negative_weight = opts.weights.negative;
  return model;
}

CrossValidationResult cross_validate_c(Matrix const& x, std::span<int const> y,
                                       std::span<double const> grid,
                                       SvmOptions const& base, int folds,
                                       std::uint64_t seed) {
  if (grid.empty()) throw_invalid("C grid is empty");
  if (folds < 2) throw_invalid("need at least two folds");
  validate_problem(x, y, base.c, base.weights);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] > 0 ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<int> fold_of(y.size());
  for (std::size_t k = 0; k < pos.size(); ++k) fold_of[pos[k]] = static_cast<int>(k % folds);
  for (std::size_t k = 0; k < neg.size(); ++k) fold_of[neg[k]] = static_cast<int>(k % folds);
  if (pos.size() < static_cast<std::size_t>(folds) ||
      neg.size() < static_cast<std::size_t>(folds)) {
    throw_invalid("a fold lacks one class after stratification",
                  std::to_string(pos.size()) + " positives, " +
                      std::to_string(neg.size()) + " negatives, " +
                      std::to_string(folds) + " folds");
  }

  CrossValidationResult result;
  result.mean_accuracy.assign(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train_rows, test_rows;
    for (std::size_t i = 0; i < y.size(); ++i) {
      (fold_of[i] == f ? test_rows : train_rows).push_back(static_cast<Eigen::Index>(i));
    }
    Matrix xt(static_cast<Eigen::Index>(train_rows.size()), x.cols());
    std::vector<int> yt;
    for (std::size_t r = 0; r < train_rows.size(); ++r) {
      xt.row(static_cast<Eigen::Index>(r)) = x.row(train_rows[r]);
      yt.push_back(y[static_cast<std::size_t>(train_rows[r])]);
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      SvmOptions o = base;
      o.c = grid[g];
      auto model = train_linear_svm(xt, yt, o);
      int correct = 0;
      for (auto r : test_rows) {
        int predicted = model.decision(x.row(r).transpose()) > 0 ? 1 : -1;
        correct += predicted == y[static_cast<std::size_t>(r)];
      }
      result.mean_accuracy[g] +=
          static_cast<double>(correct) / static_cast<double>(test_rows.size());
    }
  }
  for (auto& a : result.mean_accuracy) a /= folds;

  // Highest accuracy; among ties the smallest C.
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    double a = result.mean_accuracy[g], b = result.mean_accuracy[best];
    if (a > b + 1e-12 || (std::abs(a - b) <= 1e-12 && grid[g] < grid[best])) {
      best = g;
    }
  }
  result.best_c = grid[best];
  return result;
}

}  // namespace savanna
