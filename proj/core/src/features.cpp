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

#include "savanna/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "savanna/error.hpp"
#include "savanna/log.hpp"
#include "bytes.hpp"

namespace savanna {

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kHoc:
      return "hoc";
    case FeatureKind::kBovw:
      return "bovw";
    case FeatureKind::kCombined:
      return "combined";
  }
  return "hoc";
}

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "hoc") return FeatureKind::kHoc;
  if (text == "bovw") return FeatureKind::kBovw;
  if (text == "combined") return FeatureKind::kCombined;
  throw_invalid("unknown feature kind", std::string(text));
}

FeatureMatrix FeatureMatrix::select(std::span<std::size_t const> rows) const {
  FeatureMatrix out;
  out.kind = kind;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  out.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.ids.push_back(ids[rows[i]]);
    out.values.row(static_cast<Eigen::Index>(i)) =
        values.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

PixelCoord window_center(Point2d centroid) {
  return {static_cast<int>(std::lround(centroid.x)),
          static_cast<int>(std::lround(centroid.y))};
}

FeatureVector extract_hoc(RasterImage const& img, Point2d centroid,
                          std::string proposal_id, int window, int bins) {
  if (window <= 0 || window % 2 == 0) throw_invalid("window must be odd");
  if (bins <= 0 || bins > 256) throw_invalid("bins must lie in [1, 256]");
  if (!img.contains(centroid)) {
    throw_invalid("centroid outside image", proposal_id);
  }
  FeatureVector out{std::move(proposal_id), FeatureKind::kHoc,
                    std::vector<double>(static_cast<std::size_t>(3 * bins))};
  auto const c = window_center(centroid);
  int const half = window / 2;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      for (int ch = 0; ch < 3; ++ch) {
        int v = img.clamped(c.x + dx, c.y + dy, ch);
        int bin = std::min(v * bins / 256, bins - 1);
        out.values[static_cast<std::size_t>(ch * bins + bin)] += 1.0;
      }
    }
  }
  return out;
}

void flatten_patch(RasterImage const& img, PixelCoord center,
                   std::span<double> out, int window) {
  int const area = window * window;
  if (out.size() != static_cast<std::size_t>(3 * area)) {
    throw_invalid("patch buffer has the wrong size");
  }
  int const half = window / 2;
  for (int c = 0; c < 3; ++c) {
    for (int dy = 0; dy < window; ++dy) {
      for (int dx = 0; dx < window; ++dx) {
        out[static_cast<std::size_t>(c * area + dy * window + dx)] =
            img.clamped(center.x - half + dx, center.y - half + dy, c);
      }
    }
  }
}

PatchSet sample_patches(std::span<RasterImage const> images,
                        std::span<std::vector<PixelCoord> const> positive_pixels,
                        PatchSamplingConfig const& cfg) {
  if (images.size() != positive_pixels.size()) {
    throw_invalid("one ground-truth pixel list per image is required");
  }
  if (cfg.n_positive < 0 || cfg.n_total < cfg.n_positive) {
    throw_invalid("need 0 <= n_positive <= n_total");
  }
  std::vector<std::size_t> pos_cum;  // cumulative positive counts
  std::vector<std::size_t> bg_cum;   // cumulative background counts
  std::vector<std::vector<PixelCoord>> sorted(images.size());
  std::size_t pos_total = 0, bg_total = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    sorted[i] = positive_pixels[i];
    std::sort(sorted[i].begin(), sorted[i].end(),
              [](PixelCoord a, PixelCoord b) {
                return a.y != b.y ? a.y < b.y : a.x < b.x;
              });
    sorted[i].erase(std::unique(sorted[i].begin(), sorted[i].end()),
                    sorted[i].end());
    pos_total += sorted[i].size();
    bg_total += static_cast<std::size_t>(images[i].width()) *
                    images[i].height() -
                sorted[i].size();
    pos_cum.push_back(pos_total);
    bg_cum.push_back(bg_total);
  }
  if (cfg.n_positive > 0 && pos_total == 0) {
    throw_invalid("no ground-truth pixels to host positive patches",
                  "requested " + std::to_string(cfg.n_positive) +
                      ", available 0");
  }
  int const n_background = cfg.n_total - cfg.n_positive;
  if (n_background > 0 && bg_total == 0) {
    throw_invalid("no background pixels to host negative patches");
  }

  std::mt19937_64 rng(cfg.seed);
  auto pick = [&](std::vector<std::size_t> const& cum, std::size_t total) {
    std::uniform_int_distribution<std::size_t> u(0, total - 1);
    std::size_t r = u(rng);
    auto it = std::upper_bound(cum.begin(), cum.end(), r);
    std::size_t image = static_cast<std::size_t>(it - cum.begin());
    std::size_t offset = r - (image == 0 ? 0 : cum[image - 1]);
    return std::pair{image, offset};
  };

  PatchSet set;
  set.patches.resize(cfg.n_total, 3 * cfg.window * cfg.window);
  set.samples.reserve(static_cast<std::size_t>(cfg.n_total));
  for (int s = 0; s < cfg.n_total; ++s) {
    PatchSample sample;
    if (s < cfg.n_positive) {
      auto [image, offset] = pick(pos_cum, pos_total);
      sample = {image, sorted[image][offset], true};
    } else {
      // The offset-th background pixel of the image in scan order.
      auto [image, offset] = pick(bg_cum, bg_total);
      auto const& gt = sorted[image];
      int const w = images[image].width();
      // gt is in scan order; each ground-truth pixel at or before the
      // candidate pushes the candidate one step further.
      std::size_t lo = offset;
      for (auto g : gt) {
        std::size_t linear = static_cast<std::size_t>(g.y) * w + g.x;
        if (linear <= lo) {
          ++lo;
        } else {
          break;
        }
      }
      PixelCoord p{static_cast<int>(lo % w), static_cast<int>(lo / w)};
      sample = {image, p, false};
    }
    Eigen::Map<Vector> row_view(set.patches.row(s).data(), set.patches.cols());
    flatten_patch(images[sample.image_index], sample.center,
                  std::span<double>(row_view.data(),
                                    static_cast<std::size_t>(row_view.size())),
                  cfg.window);
    set.samples.push_back(sample);
  }
  return set;
}

FeatureVector extract_bovw(WordMap const& words, Point2d centroid,
                           std::string proposal_id, int window) {
  if (window <= 0 || window % 2 == 0) throw_invalid("window must be odd");
  int const w = words.words.width(), h = words.words.height();
  if (!(centroid.x >= 0 && centroid.y >= 0 && centroid.x <= w - 1.0 &&
        centroid.y <= h - 1.0)) {
    throw_invalid("centroid outside word map", proposal_id);
  }
  FeatureVector out{std::move(proposal_id), FeatureKind::kBovw,
                    std::vector<double>(static_cast<std::size_t>(words.k))};
  auto const c = window_center(centroid);
  int const half = window / 2;
  for (int dy = -half; dy <= half; ++dy) {
    int y = std::clamp(c.y + dy, 0, h - 1);
    for (int dx = -half; dx <= half; ++dx) {
      int x = std::clamp(c.x + dx, 0, w - 1);
      out.values[static_cast<std::size_t>(words.words.at(x, y))] += 1.0;
    }
  }
  return out;
}

NormalizationStats fit_normalization(Matrix const& train) {
  if (train.rows() == 0) throw_invalid("empty training matrix");
  NormalizationStats stats;
  stats.mean = train.colwise().mean().transpose();
  Matrix centered = train.rowwise() - stats.mean.transpose();
  stats.stddev =
      (centered.colwise().squaredNorm() / static_cast<double>(train.rows()))
          .cwiseSqrt()
          .transpose();
  for (Eigen::Index j = 0; j < stats.stddev.size(); ++j) {
    if (!(stats.stddev[j] > 0.0)) stats.stddev[j] = 1.0;
  }
  return stats;
}

void normalize_rows(Matrix& m) {
  Eigen::Index zero_rows = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double norm = m.row(i).norm();
    if (norm > 0.0) {
      m.row(i) /= norm;
    } else {
      ++zero_rows;
    }
  }
  if (zero_rows > 0) {
    log_warning(std::to_string(zero_rows) +
                " feature rows are all zero after centering; left as zero");
  }
}

Matrix apply_normalization(NormalizationStats const& stats, Matrix m) {
  if (m.cols() != stats.mean.size()) {
    throw_invalid("normalization stats do not match feature dimension");
  }
  m = (m.rowwise() - stats.mean.transpose()).array().rowwise() /
      stats.stddev.transpose().array();
  normalize_rows(m);
  return m;
}

NormalizedFeatures normalize_features(Matrix const& train,
                                      std::span<Matrix const> others) {
  NormalizedFeatures out;
  out.stats = fit_normalization(train);
  out.train = apply_normalization(out.stats, train);
  for (auto const& m : others) {
    out.others.push_back(apply_normalization(out.stats, m));
  }
  return out;
}

FeatureVector combine(FeatureVector const& hoc, FeatureVector const& bovw) {
  if (hoc.proposal_id != bovw.proposal_id) {
    throw_invalid("combine needs descriptors of the same proposal",
                  hoc.proposal_id + " vs " + bovw.proposal_id);
  }
  FeatureVector out{hoc.proposal_id, FeatureKind::kCombined, hoc.values};
  out.values.insert(out.values.end(), bovw.values.begin(), bovw.values.end());
  double norm = 0.0;
  for (double v : out.values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : out.values) v /= norm;
  }
  return out;
}

Matrix combine_rows(Matrix const& hoc, Matrix const& bovw) {
  if (hoc.rows() != bovw.rows()) {
    throw_invalid("combine needs matrices with the same rows");
  }
  Matrix out(hoc.rows(), hoc.cols() + bovw.cols());
  out << hoc, bovw;
  normalize_rows(out);
  return out;
}

// Persistence ---------------------------------------------------------------

namespace {

constexpr char kCodebookMagic[4] = {'S', 'V', 'C', 'B'};
constexpr std::uint32_t kCodebookVersion = 1;

using bytes::get_le;
using bytes::put_le;
using bytes::read_all;

}  // namespace

std::vector<std::uint8_t> encode_codebook(Codebook const& cb) {
  std::vector<std::uint8_t> out(kCodebookMagic, kCodebookMagic + 4);
  put_le<std::uint32_t>(out, kCodebookVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cb.k));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cb.dim));
  put_le<std::uint64_t>(out, cb.seed);
  for (Eigen::Index i = 0; i < cb.centers.rows(); ++i) {
    for (Eigen::Index j = 0; j < cb.centers.cols(); ++j) {
      put_le<double>(out, cb.centers(i, j));
    }
  }
  return out;
}

Codebook decode_codebook(std::span<std::uint8_t const> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCodebookMagic, 4) != 0) {
    throw_invalid("not a codebook file");
  }
  std::size_t off = 4;
  auto version = get_le<std::uint32_t>(bytes, off);
  if (version != kCodebookVersion) {
    throw_invalid("unsupported codebook version", std::to_string(version));
  }
  Codebook cb;
  cb.k = static_cast<int>(get_le<std::uint32_t>(bytes, off));
  cb.dim = static_cast<int>(get_le<std::uint32_t>(bytes, off));
  cb.seed = get_le<std::uint64_t>(bytes, off);
  if (cb.k < 1 || cb.dim < 1) throw_invalid("codebook header is invalid");
  cb.centers.resize(cb.k, cb.dim);
  for (int i = 0; i < cb.k; ++i) {
    for (int j = 0; j < cb.dim; ++j) cb.centers(i, j) = get_le<double>(bytes, off);
  }
  if (off != bytes.size()) throw_invalid("trailing bytes in codebook file");
  return cb;
}

void save_codebook(std::filesystem::path const& path, Codebook const& cb) {
  bytes::write_all(path, encode_codebook(cb));
}

Codebook load_codebook(std::filesystem::path const& path) {
  auto bytes = read_all(path);
  return decode_codebook(bytes);
}

std::string feature_matrix_to_csv(FeatureMatrix const& m) {
  std::ostringstream out;
  out.precision(17);
  out << "proposal_id";
  for (Eigen::Index j = 0; j < m.values.cols(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    out << m.ids[i];
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      out << ',' << m.values(static_cast<Eigen::Index>(i), j);
    }
    out << '\n';
  }
  return out.str();
}

FeatureMatrix feature_matrix_from_csv(std::string_view text, FeatureKind kind) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("proposal_id", 0) != 0) {
    throw_invalid("feature CSV header mismatch");
  }
  auto dim = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  FeatureMatrix m;
  m.kind = kind;
  std::vector<double> flat;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    m.ids.push_back(field);
    Eigen::Index count = 0;
    while (std::getline(row, field, ',')) {
      char* end = nullptr;
      double v = std::strtod(field.c_str(), &end);
      if (field.empty() || *end != '\0') {
        throw_invalid("bad number in feature CSV", m.ids.back() + ": " + field);
      }
      flat.push_back(v);
      ++count;
    }
    if (count != dim) throw_invalid("feature CSV row has wrong arity", m.ids.back());
  }
  m.values = Eigen::Map<Matrix>(flat.data(),
                                static_cast<Eigen::Index>(m.ids.size()), dim);
  return m;
}

}  // namespace savanna
