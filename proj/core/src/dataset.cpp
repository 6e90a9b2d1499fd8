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

#include "savanna/dataset.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bytes.hpp"
#include "savanna/error.hpp"
#include "savanna/image_io.hpp"
#include "savanna/log.hpp"

namespace savanna {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::vector<fs::path> sorted_files(fs::path const& dir, std::string const& ext) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (auto const& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto x = e.path().extension().string();
    std::transform(x.begin(), x.end(), x.begin(), [](unsigned char c) { return std::tolower(c); });
    if (x == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string format_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

std::string to_json(DatasetManifest const& m) {
  ordered_json j;
  j["dataset_id"] = m.dataset_id;
  auto& images = j["images"] = ordered_json::array();
  for (auto const& e : m.images) {
    ordered_json i;
    i["image_id"] = e.image_id;
    i["file"] = e.file;
    i["gsd_cm"] = e.gsd_cm;
    i["acquired_at"] = e.acquired_at ? ordered_json(*e.acquired_at) : ordered_json(nullptr);
    i["width"] = e.width;
    i["height"] = e.height;
    images.push_back(std::move(i));
  }
  j["annotation_files"] = m.annotation_files;
  j["derived"] = m.derived;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    DatasetManifest m;
    m.dataset_id = j.at("dataset_id").get<std::string>();
    for (auto const& i : j.at("images")) {
      ImageEntry e;
      e.image_id = i.at("image_id").get<std::string>();
      e.file = i.at("file").get<std::string>();
      e.gsd_cm = i.at("gsd_cm").get<double>();
      if (!i.at("acquired_at").is_null()) e.acquired_at = i.at("acquired_at").get<std::string>();
      e.width = i.at("width").get<int>();
      e.height = i.at("height").get<int>();
      m.images.push_back(std::move(e));
    }
    m.annotation_files = j.value("annotation_files", std::vector<std::string>{});
    m.derived = j.value("derived", std::map<std::string, std::string>{});
    return m;
  } catch (nlohmann::json::exception const& e) {
    throw_invalid("malformed manifest", e.what());
  }
}

IngestReport ingest_dataset(fs::path const& root, double fallback_gsd_cm) {
  auto pngs = sorted_files(root / "images", ".png");
  if (pngs.empty()) throw_invalid("images/ holds no PNG files", (root / "images").string());
  IngestReport rep;
  auto& m = rep.manifest;
  m.dataset_id = fs::weakly_canonical(root).filename().string();
  std::set<std::string> seen;
  for (auto const& path : pngs) {
    auto rel = fs::relative(path, root).generic_string();
    try {
      auto img = read_png(path, fallback_gsd_cm);
      if (!seen.insert(img.id()).second) {
        rep.rejected.push_back({rel, "duplicate image id " + img.id()});
        continue;
      }
      ImageEntry e{img.id(), rel, img.gsd_cm(), std::nullopt, img.width(), img.height()};
      if (img.acquired_at()) e.acquired_at = img.acquired_at()->iso8601();
      m.images.push_back(std::move(e));
    } catch (Error const& err) {
      rep.rejected.push_back({rel, err.what()});
      log_warning("skipping " + rel + ": " + err.what());
    }
  }
  for (auto const& path : sorted_files(root / "annotations", ".json")) {
    m.annotation_files.push_back(fs::relative(path, root).generic_string());
  }
  if (fs::is_directory(root / "derived")) {
    std::vector<fs::path> files;
    for (auto const& e : fs::directory_iterator(root / "derived")) {
      if (e.is_regular_file() && e.path().extension() != ".tmp") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (auto const& f : files) m.derived[f.stem().string()] = fs::relative(f, root).generic_string();
  }
  bytes::write_text_atomic(root / "manifest.json", to_json(m));
  return rep;
}

void write_synth_dataset(SynthDataset const& data, fs::path const& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "annotations");
  fs::create_directories(root / "truth");
  for (auto const& img : data.images) write_png(root / "images" / (img.id() + ".png"), img);
  for (auto const& doc : data.annotations) {
    bytes::write_text_atomic(root / "annotations" / (doc.image_id + ".json"), to_json(doc));
  }
  bytes::write_text_atomic(root / "truth" / "ground_truth.json",
                           ground_truth_to_json(data.ground_truth, false));
}

std::string PipelineConfig::fingerprint() const {
  std::ostringstream s;
  auto const& p = proposals;
  s << "proposals(v=" << p.value_threshold << ",s=" << p.sobel_threshold << ",a=" << p.min_area_px
    << ",r=" << p.merge_radius_cm << ",g=" << p.working_gsd_cm << ",c=" << static_cast<int>(p.connectivity)
    << ");patches(" << features.patches.n_total << "," << features.patches.n_positive << ","
    << features.patches.seed << ");kmeans(" << features.kmeans.seed << "," << features.kmeans.max_iter
    << "," << features.kmeans.tol << ");split(" << train_fraction << "," << split_seed << ")";
  return s.str();
}

// Dataset ---------------------------------------------------------------------

Dataset::Dataset(fs::path root, DatasetManifest manifest, PipelineConfig cfg)
    : root_(std::move(root)), manifest_(std::move(manifest)), cfg_(std::move(cfg)) {}

Dataset Dataset::open(fs::path root, PipelineConfig cfg) {
  cfg.proposals.validate();
  DatasetManifest m = fs::exists(root / "manifest.json")
                          ? manifest_from_json(bytes::read_text(root / "manifest.json"))
                          : ingest_dataset(root).manifest;
  Dataset d(std::move(root), std::move(m), std::move(cfg));
  fs::create_directories(d.root_ / "derived");
  // Artifacts produced under another configuration are ignored.
  auto stamp = d.derived("pipeline_fingerprint.txt");
  auto fp = d.cfg_.fingerprint();
  if (!fs::exists(stamp) || bytes::read_text(stamp) != fp) {
    for (auto const& name : {"proposals.csv", "split.json", "model.bin"}) fs::remove(d.derived(name));
    for (auto const& e : fs::directory_iterator(d.root_ / "derived")) {
      auto n = e.path().filename().string();
      if (n.starts_with("codebook_") || n.starts_with("features_")) fs::remove(e.path());
    }
    bytes::write_text_atomic(stamp, fp);
  }
  return d;
}

fs::path Dataset::derived(std::string const& name) const { return root_ / "derived" / name; }

void Dataset::record(std::string const& name, fs::path const& path) {
  manifest_.derived[name] = fs::relative(path, root_).generic_string();
  bytes::write_text_atomic(root_ / "manifest.json", to_json(manifest_));
}

std::vector<RasterImage> Dataset::load_images() const {
  std::vector<RasterImage> out;
  for (auto const& e : manifest_.images) {
    auto img = read_png(root_ / e.file, e.gsd_cm);
    if (img.id() != e.image_id) throw_invalid("image id changed since ingest", e.file);
    out.push_back(std::move(img));
  }
  return out;
}

RasterImage Dataset::load_image(std::string const& image_id) const {
  for (auto const& e : manifest_.images) {
    if (e.image_id == image_id) return read_png(root_ / e.file, e.gsd_cm);
  }
  throw Error(ErrorCode::kNotFound, "unknown image", image_id);
}

std::vector<GroundTruthObject> Dataset::fuse() {
  std::map<std::string, ImageEntry const*> by_id;
  for (auto const& e : manifest_.images) by_id[e.image_id] = &e;
  std::vector<GroundTruthObject> objects;
  for (auto const& rel : manifest_.annotation_files) {
    auto doc = parse_polygon_document(bytes::read_text(root_ / rel));
    auto it = by_id.find(doc.image_id);
    if (it == by_id.end()) {
      log_warning("annotations for unknown image " + doc.image_id + " in " + rel);
      continue;
    }
    clamp_to_image(doc, it->second->width, it->second->height);
    auto map = build_consensus(doc.polygons, doc.viewer_count, it->second->width,
                               it->second->height, doc.image_id);
    auto found = extract_objects(map);
    objects.insert(objects.end(), std::make_move_iterator(found.begin()),
                   std::make_move_iterator(found.end()));
  }
  if (fs::exists(derived("verification.json"))) {
    auto j = nlohmann::json::parse(bytes::read_text(derived("verification.json")));
    std::map<std::string, Verification> decisions;
    std::set<std::string> known;
    for (auto const& o : objects) known.insert(o.object_id);
    for (auto const& [id, v] : j.at("decisions").items()) {
      if (known.contains(id)) decisions[id] = parse_verification(v.get<std::string>());
    }
    objects = verify_objects(std::move(objects), decisions);
  }
  // Labels and positive patches follow the ground truth.
  auto pixels_json = ground_truth_to_json(objects, true);
  auto cached = derived("ground_truth_pixels.json");
  if (!fs::exists(cached) || bytes::read_text(cached) != pixels_json) {
    for (auto const& e : fs::directory_iterator(root_ / "derived")) {
      auto n = e.path().filename().string();
      if (n == "proposals.csv" || n == "model.bin" || n.starts_with("codebook_") ||
          n.starts_with("features_")) {
        fs::remove(e.path());
      }
    }
    proposals_.reset();
    bank_.reset();
  }
  bytes::write_text_atomic(cached, pixels_json);
  bytes::write_text_atomic(derived("ground_truth.json"), ground_truth_to_json(objects, false));
  record("ground_truth", derived("ground_truth.json"));
  ground_truth_ = objects;
  return objects;
}

std::vector<GroundTruthObject> Dataset::ground_truth() {
  if (ground_truth_) return *ground_truth_;
  if (fs::exists(derived("ground_truth_pixels.json"))) {
    ground_truth_ = ground_truth_from_json(bytes::read_text(derived("ground_truth_pixels.json")));
    return *ground_truth_;
  }
  return fuse();
}

std::vector<Proposal> Dataset::proposals() {
  if (proposals_) return *proposals_;
  auto path = derived("proposals.csv");
  if (fs::exists(path)) {
    proposals_ = proposals_from_csv(bytes::read_text(path));
  } else {
    auto images = load_images();
    auto gt = ground_truth();
    proposals_ = propose_and_label(images, gt, cfg_.proposals);
    bytes::write_text_atomic(path, proposals_to_csv(*proposals_));
    record("proposals", path);
  }
  return *proposals_;
}

ImageSplit Dataset::split() {
  std::vector<std::string> ids;
  for (auto const& e : manifest_.images) ids.push_back(e.image_id);
  auto s = split_images(ids, cfg_.train_fraction, cfg_.split_seed);
  auto path = derived("split.json");
  if (!fs::exists(path)) {
    ordered_json j{{"train", s.train}, {"test", s.test}};
    bytes::write_text_atomic(path, j.dump(2));
    record("split", path);
  }
  return s;
}

FeatureBank& Dataset::bank() {
  if (!bank_) {
    auto props = proposals();
    bank_ = std::make_unique<FeatureBank>(load_images(), ground_truth(), std::move(props),
                                          split().train, cfg_.features);
  }
  return *bank_;
}

Codebook Dataset::codebook(int k, double gsd_cm) {
  auto name = "codebook_k" + std::to_string(k) + "_gsd" + format_number(gsd_cm);
  auto path = derived(name + ".bin");
  if (fs::exists(path)) {
    auto cb = load_codebook(path);
    bank().set_codebook(gsd_cm, k, cb);
    return cb;
  }
  auto cb = bank().codebook(gsd_cm, k);
  save_codebook(path, cb);
  record(name, path);
  return cb;
}

FeatureMatrix Dataset::features(FeatureKind kind, int k, double gsd_cm) {
  if (kind == FeatureKind::kCombined) {
    throw_invalid("combined features are assembled from normalized HOC and BoVW blocks");
  }
  auto name = kind == FeatureKind::kHoc
                  ? "features_hoc_gsd" + format_number(gsd_cm)
                  : "features_bovw_k" + std::to_string(k) + "_gsd" + format_number(gsd_cm);
  auto path = derived(name + ".csv");
  if (fs::exists(path)) {
    auto m = feature_matrix_from_csv(bytes::read_text(path), kind);
    bank().set_features(gsd_cm, k, m);
    return m;
  }
  if (kind == FeatureKind::kBovw) codebook(k, gsd_cm);
  auto m = kind == FeatureKind::kHoc ? bank().hoc(gsd_cm) : bank().bovw(gsd_cm, k);
  bytes::write_text_atomic(path, feature_matrix_to_csv(m));
  record(name, path);
  return m;
}

namespace {

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> labelled_rows(
    std::vector<Proposal> const& props, std::vector<std::size_t> const& rows) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (props[rows[i]].label == ProposalLabel::kAnimal) pos.push_back(i);
    if (props[rows[i]].label == ProposalLabel::kBackground) neg.push_back(i);
  }
  return {pos, neg};
}

FeatureMatrix subset(Matrix const& values, std::vector<Proposal> const& props,
                     std::vector<std::size_t> const& rows, std::vector<std::size_t> const& pick,
                     FeatureKind kind) {
  FeatureMatrix m;
  m.kind = kind;
  m.values.resize(static_cast<Eigen::Index>(pick.size()), values.cols());
  for (std::size_t i = 0; i < pick.size(); ++i) {
    m.ids.push_back(props[rows[pick[i]]].proposal_id);
    m.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(pick[i]));
  }
  return m;
}

void ensure_features(Dataset& d, FeatureKind kind, int k, double gsd) {
  if (kind != FeatureKind::kBovw) d.features(FeatureKind::kHoc, k, gsd);
  if (kind != FeatureKind::kHoc) d.features(FeatureKind::kBovw, k, gsd);
}

}  // namespace

SessionPools Dataset::session_pools() {
  ensure_features(*this, cfg_.kind, cfg_.k, cfg_.gsd_cm);
  auto props = proposals();
  auto s = split();
  auto tr = rows_in_images(props, s.train), te = rows_in_images(props, s.test);
  auto prepared = prepare_features(bank(), cfg_.kind, cfg_.k, cfg_.gsd_cm, tr, te);
  auto [pos, neg] = labelled_rows(props, tr);
  SessionPools pools;
  pools.positives = subset(prepared.train, props, tr, pos, cfg_.kind);
  pools.negatives = subset(prepared.train, props, tr, neg, cfg_.kind);
  auto [tpos, tneg] = labelled_rows(props, te);
  std::vector<std::size_t> test_pick;
  std::merge(tpos.begin(), tpos.end(), tneg.begin(), tneg.end(), std::back_inserter(test_pick));
  pools.test = subset(prepared.test, props, te, test_pick, cfg_.kind);
  for (auto i : test_pick) pools.test_animal.push_back(props[te[i]].label == ProposalLabel::kAnimal);
  pools.fingerprint = prepared.fingerprint;
  return pools;
}

TrainSummary Dataset::train() {
  auto pools = session_pools();
  EnsembleConfig ec = cfg_.ensemble;
  ec.fingerprint = pools.fingerprint;
  auto build = build_ensemble(pools.positives, pools.negatives, ec);
  save_ensemble(derived("model.bin"), build.ensemble);
  record("model", derived("model.bin"));
  TrainSummary s{build.ensemble.members.size(), pools.positives.rows(), pools.negatives.rows(),
                 class_ratio(pools.positives.rows(), pools.negatives.rows()), build.dropped};
  ordered_json j{{"members", s.members}, {"positives", s.positives}, {"negatives", s.negatives},
                 {"ratio", s.ratio}, {"dropped", s.dropped.size()}};
  bytes::write_text_atomic(derived("train_report.json"), j.dump(2));
  return s;
}

Ensemble Dataset::model() {
  if (!fs::exists(derived("model.bin"))) train();
  return load_ensemble(derived("model.bin"));
}

EvaluationSummary Dataset::evaluate(bool run_grid, bool run_unbalanced) {
  auto props = proposals();
  auto s = split();
  auto tr = rows_in_images(props, s.train), te = rows_in_images(props, s.test);
  fs::create_directories(root_ / "derived" / "eval");
  EvaluationSummary out;
  if (run_grid) {
    for (auto const& cell : cfg_.grid.cells()) ensure_features(*this, cell.kind, cell.k, cell.gsd_cm);
    out.ablation = run_balanced_ablation(bank(), tr, te, cfg_.grid);
    for (auto const& r : out.ablation) {
      auto name = to_string(r.key);
      std::replace(name.begin(), name.end(), '/', '_');
      bytes::write_text_atomic(root_ / "derived" / "eval" / ("roc_" + name + ".csv"), curve_to_csv(r.mean));
    }
    bytes::write_text_atomic(root_ / "derived" / "eval" / "ablation.json",
                             ablation_summary_json(out.ablation, cfg_.grid));
  }
  if (run_unbalanced) {
    ensure_features(*this, cfg_.kind, cfg_.k, cfg_.gsd_cm);
    UnbalancedConfig uc{cfg_.kind, cfg_.k, cfg_.gsd_cm, cfg_.ensemble, 0.10};
    auto rep = run_unbalanced_eval(bank(), tr, te, uc);
    bytes::write_text_atomic(root_ / "derived" / "eval" / "pr_unbalanced.csv", curve_to_csv(rep.pr));
    ordered_json j{{"train_positives", rep.train_positives}, {"train_negatives", rep.train_negatives},
                   {"test_positives", rep.test_positives},   {"test_negatives", rep.test_negatives},
                   {"train_ratio", rep.train_ratio},         {"test_ratio", rep.test_ratio},
                   {"average_precision", rep.pr.auc},        {"recall_at_precision_0.10", rep.recall_at_precision},
                   {"members", rep.members}};
    bytes::write_text_atomic(root_ / "derived" / "eval" / "unbalanced.json", j.dump(2));
    out.unbalanced = std::move(rep);
  }
  return out;
}

fs::path Dataset::export_ground_truth() {
  auto objects = training_objects(ground_truth());
  auto props = proposals();
  std::map<std::string, Proposal const*> by_id;
  for (auto const& p : props) by_id[p.proposal_id] = &p;
  int factor = 1;
  if (!manifest_.images.empty()) {
    factor = resample_factor(manifest_.images.front().gsd_cm, cfg_.proposals.working_gsd_cm);
  }
  std::set<std::string> promoted, unclear;
  if (fs::is_directory(root_ / "sessions")) {
    std::vector<fs::path> dirs;
    for (auto const& e : fs::directory_iterator(root_ / "sessions")) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (auto const& dir : dirs) {
      if (!fs::exists(dir / "snapshot.json")) continue;
      auto j = nlohmann::json::parse(bytes::read_text(dir / "snapshot.json"));
      for (auto const& id : j.value("promoted", std::vector<std::string>{})) promoted.insert(id);
      for (auto const& [id, reason] : j.value("removed", std::map<std::string, std::string>{})) {
        if (reason == "unclear") unclear.insert(id);
      }
    }
  }
  for (auto const& id : promoted) {
    if (unclear.contains(id)) continue;
    auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    GroundTruthObject o;
    o.object_id = id + "/al";
    o.image_id = it->second->image_id;
    o.centroid = to_native(it->second->centroid, factor);
    o.source = ObjectSource::kActiveLearning;
    objects.push_back(std::move(o));
  }
  if (fs::exists(derived("verification.json"))) {
    auto j = nlohmann::json::parse(bytes::read_text(derived("verification.json")));
    std::set<std::string> known;
    for (auto const& o : objects) known.insert(o.object_id);
    std::map<std::string, Verification> decisions;
    for (auto const& [id, v] : j.at("decisions").items()) {
      if (known.contains(id)) decisions[id] = parse_verification(v.get<std::string>());
    }
    objects = training_objects(verify_objects(std::move(objects), decisions));
  }
  if (objects.empty()) throw_invalid("nothing to export", id());
  auto path = derived("ground_truth_export.json");
  bytes::write_text_atomic(path, ground_truth_to_json(objects, false));
  record("ground_truth_export", path);
  return path;
}

std::string Dataset::run_stages(std::vector<std::string> const& stages) {
  static std::set<std::string> const known{"fuse", "proposals", "codebook", "features", "train", "evaluate"};
  for (auto const& s : stages) {
    if (!known.contains(s)) throw_invalid("unknown pipeline stage", s);
  }
  ordered_json out = ordered_json::object();
  for (auto const& s : stages) {
    if (s == "fuse") {
      auto gt = fuse();
      out["fuse"] = {{"objects", gt.size()}};
    } else if (s == "proposals") {
      auto p = proposals();
      auto animals = std::count_if(p.begin(), p.end(),
                                   [](Proposal const& x) { return x.label == ProposalLabel::kAnimal; });
      out["proposals"] = {{"count", p.size()}, {"animal", animals}};
    } else if (s == "codebook") {
      auto cb = codebook(cfg_.k, cfg_.gsd_cm);
      out["codebook"] = {{"k", cb.k}, {"gsd_cm", cfg_.gsd_cm}, {"iterations", cb.iterations_run},
                         {"distortion", cb.distortion}};
    } else if (s == "features") {
      ensure_features(*this, cfg_.kind, cfg_.k, cfg_.gsd_cm);
      out["features"] = {{"rows", proposals().size()}, {"kind", to_string(cfg_.kind)}};
    } else if (s == "train") {
      auto t = train();
      out["train"] = {{"members", t.members}, {"positives", t.positives},
                      {"negatives", t.negatives}, {"ratio", t.ratio}};
    } else {
      auto e = evaluate(true, true);
      ordered_json cells = ordered_json::array();
      for (auto const& r : e.ablation) cells.push_back({{"key", to_string(r.key)}, {"auc", r.mean.auc}});
      out["evaluate"] = {{"ablation", cells}};
      if (e.unbalanced) {
        out["evaluate"]["unbalanced"] = {{"train_ratio", e.unbalanced->train_ratio},
                                         {"test_ratio", e.unbalanced->test_ratio},
                                         {"recall_at_precision_0.10", e.unbalanced->recall_at_precision}};
      }
    }
  }
  return out.dump(2);
}

}  // namespace savanna
