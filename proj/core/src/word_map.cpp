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

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>

#include "savanna/error.hpp"
#include "savanna/features.hpp"

namespace savanna {
namespace {

constexpr std::size_t kBatchImages = 16;

int good_fft_size(int n) {
  for (int m = n;; ++m) {
    int r = m;
    for (int f : {2, 3, 5, 7}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return m;
  }
}

template <typename T>
struct FftwDeleter {
  void operator()(T* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter<T>>;

template <typename T>
FftwBuffer<T> fftw_alloc(std::size_t count) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * count));
  if (!p) throw Error(ErrorCode::kInternal, "FFTW allocation failed");
  return FftwBuffer<T>(p);
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

int window_of(Codebook const& cb) {
  int side = static_cast<int>(std::lround(std::sqrt(cb.dim / 3.0)));
  if (side * side * 3 != cb.dim || side % 2 == 0) {
    throw_invalid("codebook dimension is not 3 * odd^2", std::to_string(cb.dim));
  }
  return side;
}

double exact_patch_distance(RasterImage const& img, int x, int y, int window,
                            Matrix const& centers, Eigen::Index j) {
  int const half = window / 2;
  int const area = window * window;
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int dy = 0; dy < window; ++dy) {
      for (int dx = 0; dx < window; ++dx) {
        double d = img.clamped(x - half + dx, y - half + dy, c) -
                   centers(j, c * area + dy * window + dx);
        s += d * d;
      }
    }
  }
  return s;
}

// One batch of same-sized images against every center.
void assign_batch(std::span<RasterImage const* const> batch,
                  Codebook const& cb, int window,
                  std::span<WordMap*> outputs) {
  int const w = batch[0]->width(), h = batch[0]->height();
  int const half = window / 2;
  int const pw = w + window - 1, ph = h + window - 1;
  int const nw = good_fft_size(pw), nh = good_fft_size(ph);
  int const nc = nw / 2 + 1;
  std::size_t const real_len = static_cast<std::size_t>(nh) * nw;
  std::size_t const cplx_len = static_cast<std::size_t>(nh) * nc;
  double const scale = 1.0 / static_cast<double>(real_len);

  auto real = fftw_alloc<double>(real_len);
  auto cplx = fftw_alloc<fftw_complex>(cplx_len);
  Plan forward(fftw_plan_dft_r2c_2d(nh, nw, real.get(), cplx.get(), FFTW_ESTIMATE));
  Plan inverse(fftw_plan_dft_c2r_2d(nh, nw, cplx.get(), real.get(), FFTW_ESTIMATE));

  std::size_t const nb = batch.size();
  std::size_t const npx = static_cast<std::size_t>(w) * h;
  std::vector<FftwBuffer<fftw_complex>> spectra;
  std::vector<std::vector<double>> pnorm(nb, std::vector<double>(npx));
  double max_pnorm = 0.0;

  for (std::size_t b = 0; b < nb; ++b) {
    auto const& img = *batch[b];
    std::vector<std::int64_t> integral(static_cast<std::size_t>(ph + 1) * (pw + 1), 0);
    auto at = [&](int yy, int xx) -> std::int64_t& {
      return integral[static_cast<std::size_t>(yy) * (pw + 1) + xx];
    };
    for (int c = 0; c < 3; ++c) {
      std::fill(real.get(), real.get() + real_len, 0.0);
      for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
          real[static_cast<std::size_t>(y) * nw + x] =
              img.clamped(x - half, y - half, c);
        }
      }
      auto spec = fftw_alloc<fftw_complex>(cplx_len);
      fftw_execute_dft_r2c(forward.get(), real.get(), spec.get());
      spectra.push_back(std::move(spec));
      for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
          std::int64_t v = img.clamped(x - half, y - half, c);
          at(y + 1, x + 1) += v * v;
        }
      }
    }
    for (int y = 1; y <= ph; ++y) {
      for (int x = 1; x <= pw; ++x) {
        at(y, x) += at(y - 1, x) + at(y, x - 1) - at(y - 1, x - 1);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::int64_t s = at(y + window, x + window) - at(y, x + window) -
                         at(y + window, x) + at(y, x);
        pnorm[b][static_cast<std::size_t>(y) * w + x] = static_cast<double>(s);
        max_pnorm = std::max(max_pnorm, static_cast<double>(s));
      }
    }
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best(nb, std::vector<double>(npx, kInf));
  std::vector<std::vector<double>> second(nb, std::vector<double>(npx, kInf));
  std::vector<std::vector<int>> best_idx(nb, std::vector<int>(npx, 0));

  int const area = window * window;
  std::vector<FftwBuffer<fftw_complex>> center_spec;
  for (int c = 0; c < 3; ++c) center_spec.push_back(fftw_alloc<fftw_complex>(cplx_len));
  auto acc = fftw_alloc<fftw_complex>(cplx_len);
  auto corr = fftw_alloc<double>(real_len);
  double max_cnorm = 0.0;

  for (Eigen::Index j = 0; j < cb.centers.rows(); ++j) {
    double const cnorm = cb.centers.row(j).squaredNorm();
    max_cnorm = std::max(max_cnorm, cnorm);
    for (int c = 0; c < 3; ++c) {
      std::fill(real.get(), real.get() + real_len, 0.0);
      for (int u = 0; u < window; ++u) {
        for (int v = 0; v < window; ++v) {
          real[static_cast<std::size_t>(u) * nw + v] =
              cb.centers(j, c * area + u * window + v);
        }
      }
      fftw_execute_dft_r2c(forward.get(), real.get(), center_spec[c].get());
    }
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t i = 0; i < cplx_len; ++i) {
        double re = 0.0, im = 0.0;
        for (int c = 0; c < 3; ++c) {
          auto const& f = spectra[b * 3 + c][i];
          auto const& g = center_spec[c][i];
          // f * conj(g)
          re += f[0] * g[0] + f[1] * g[1];
          im += f[1] * g[0] - f[0] * g[1];
        }
        acc[i][0] = re;
        acc[i][1] = im;
      }
      fftw_execute_dft_c2r(inverse.get(), acc.get(), corr.get());
      auto& bd = best[b];
      auto& sd = second[b];
      auto& bi = best_idx[b];
      auto const& pn = pnorm[b];
      for (int y = 0; y < h; ++y) {
        double const* row = corr.get() + static_cast<std::size_t>(y) * nw;
        std::size_t const base = static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
          std::size_t const p = base + x;
          double d = pn[p] - 2.0 * row[x] * scale + cnorm;
          if (d < bd[p]) {
            sd[p] = bd[p];
            bd[p] = d;
            bi[p] = static_cast<int>(j);
          } else if (d < sd[p]) {
            sd[p] = d;
          }
        }
      }
    }
  }

  // Rounding in the transform is far below this margin; anything closer is
  // resolved exactly.
  double const eps = 1e-9 * (max_pnorm + max_cnorm) + 1e-6;
  for (std::size_t b = 0; b < nb; ++b) {
    auto& words = outputs[b]->words;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::size_t const p = static_cast<std::size_t>(y) * w + x;
        int idx = best_idx[b][p];
        if (!(second[b][p] - best[b][p] > eps)) {
          double bd = kInf;
          for (Eigen::Index j = 0; j < cb.centers.rows(); ++j) {
            double d = exact_patch_distance(*batch[b], x, y, window, cb.centers, j);
            if (d < bd) {
              bd = d;
              idx = static_cast<int>(j);
            }
          }
        }
        words.at(x, y) = idx;
      }
    }
  }
}

}  // namespace

std::vector<WordMap> assign_words(std::span<RasterImage const> images,
                                  Codebook const& codebook) {
  if (codebook.k < 1 || codebook.centers.rows() != codebook.k) {
    throw_invalid("codebook is not trained");
  }
  int const window = window_of(codebook);
  std::vector<WordMap> out;
  out.reserve(images.size());
  std::map<std::pair<int, int>, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < images.size(); ++i) {
    out.push_back({images[i].id(), codebook.k,
                   Grid<int>(images[i].width(), images[i].height(), 0)});
    by_size[{images[i].width(), images[i].height()}].push_back(i);
  }
  for (auto const& [size, indices] : by_size) {
    for (std::size_t start = 0; start < indices.size(); start += kBatchImages) {
      std::size_t end = std::min(indices.size(), start + kBatchImages);
      std::vector<RasterImage const*> batch;
      std::vector<WordMap*> dest;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&images[indices[i]]);
        dest.push_back(&out[indices[i]]);
      }
      assign_batch(batch, codebook, window, dest);
    }
  }
  return out;
}

WordMap assign_words(RasterImage const& img, Codebook const& codebook) {
  return std::move(assign_words(std::span<RasterImage const>(&img, 1), codebook)
                       .front());
}

}  // namespace savanna
