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

#include "savanna/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "../bytes.hpp"
#include "savanna/error.hpp"
#include "savanna/image_io.hpp"
#include "savanna/log.hpp"
#include "savanna/metrics.hpp"

namespace savanna {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kVerdictNotInQuery:
    case ErrorCode::kSessionComplete:
      return 409;
    case ErrorCode::kCalibrationFailure:
    case ErrorCode::kTrainingFailure:
      return 422;
    case ErrorCode::kIoError:
    case ErrorCode::kInternal:
      return 500;
  }
  return 500;
}

std::string error_body(ErrorCode code, std::string_view message, std::string_view detail) {
  ordered_json j{{"code", to_string(code)}, {"message", message}, {"detail", detail}};
  return j.dump();
}

namespace {

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_path(std::string_view path) {
  if (auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) parts.emplace_back(path.substr(i, j - i));
    i = j + 1;
  }
  return parts;
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw_invalid("request body must be a JSON object");
    return j;
  } catch (json::exception const& e) {
    throw_invalid("malformed JSON body", e.what());
  }
}

ordered_json counts_json(SessionCounts const& c) {
  return {{"positives", c.positives},
          {"negatives", c.negatives},
          {"promoted", c.promoted},
          {"removed_unclear", c.removed_unclear},
          {"removed_animal", c.removed_animal},
          {"queries_answered", c.queries_answered}};
}

SessionCounts counts_of(PoolState const& s) {
  SessionCounts c;
  for (std::size_t r = 0; r < s.membership.size(); ++r) {
    if (s.membership[r] == Membership::kPositive) ++c.positives;
    if (s.membership[r] == Membership::kNegative) ++c.negatives;
    if (s.promoted[r]) ++c.promoted;
    if (s.reason[r] == RemovalReason::kUnclear) ++c.removed_unclear;
    if (s.reason[r] == RemovalReason::kAnimalNotPromoted) ++c.removed_animal;
  }
  c.queries_answered = s.queries_answered;
  return c;
}

ordered_json query_json(Query const& q) {
  ordered_json items = ordered_json::array();
  for (auto const& it : q.items) {
    items.push_back({{"proposal_id", it.proposal_id}, {"score", it.score}, {"chip", it.chip}});
  }
  return {{"query_id", q.query_id},
          {"exemplar_id", q.exemplar_id},
          {"exemplar_chip", "/chips/" + q.exemplar_id},
          {"items", items}};
}

ordered_json curve_json(Curve const& c) {
  ordered_json pts = ordered_json::array();
  for (auto const& p : c.points) {
    // JSON has no infinities; the sentinels carry a null threshold.
    ordered_json t = std::isfinite(p.threshold) ? ordered_json(p.threshold) : ordered_json(nullptr);
    pts.push_back({{"threshold", t}, {"x", p.x}, {"y", p.y}});
  }
  return {{"kind", c.kind == CurveKind::kPr ? "pr" : "roc"}, {"auc", c.auc}, {"points", pts}};
}

Verdict parse_verdict(json const& v) {
  if (!v.is_object()) throw_invalid("each verdict must be an object");
  Verdict out;
  try {
    out.proposal_id = v.at("proposal_id").get<std::string>();
    out.decision = parse_decision(v.at("decision").get<std::string>());
    out.promote_to_exemplar = v.value("promote", false);
  } catch (json::exception const& e) {
    throw_invalid("malformed verdict", e.what());
  }
  return out;
}

std::string text_field(json const& body, char const* name, bool required) {
  auto it = body.find(name);
  if (it == body.end() || it->is_null()) {
    if (required) throw_invalid(std::string("missing field ") + name);
    return {};
  }
  if (!it->is_string()) throw_invalid(std::string(name) + " must be a string");
  return it->get<std::string>();
}

}  // namespace

struct DatasetSlot {
  std::mutex mu;
  std::unique_ptr<Dataset> dataset;
  std::optional<SessionPools> pools;
  std::map<std::string, Proposal> proposals;
  std::map<std::string, RasterImage> working_images;
};

struct SessionSlot {
  std::mutex mu;
  std::string id;
  std::string dataset_id;
  fs::path dir;
  std::unique_ptr<Session> session;
  // Evaluation of the pools at a given log length, shared by metrics and
  // finalize.
  std::optional<std::size_t> evaluated_at;
  ordered_json evaluation;
  std::optional<std::size_t> finalized_at;
};

struct Service::Impl {
  ServiceConfig cfg;
  std::mutex mu;
  std::map<std::string, std::unique_ptr<DatasetSlot>> datasets;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions;
  std::map<std::string, std::string> creation_keys;
  httplib::Server server;

  explicit Impl(ServiceConfig c) : cfg(std::move(c)) {
    fs::create_directories(cfg.data_root);
    discover_sessions();
  }

  std::vector<std::string> dataset_dirs() const {
    std::vector<std::string> out;
    for (auto const& e : fs::directory_iterator(cfg.data_root)) {
      if (e.is_directory() && fs::is_directory(e.path() / "images")) {
        out.push_back(e.path().filename().string());
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // Session directories are indexed eagerly and loaded on first use.
  void discover_sessions() {
    for (auto const& ds : dataset_dirs()) {
      auto dir = cfg.data_root / ds / "sessions";
      if (!fs::is_directory(dir)) continue;
      for (auto const& e : fs::directory_iterator(dir)) {
        auto meta = e.path() / "session.json";
        if (!fs::exists(meta)) continue;
        try {
          auto j = json::parse(bytes::read_text(meta));
          auto slot = std::make_shared<SessionSlot>();
          slot->id = j.at("session_id").get<std::string>();
          slot->dataset_id = ds;
          slot->dir = e.path();
          auto key = j.value("idempotency_key", std::string{});
          if (!key.empty()) creation_keys[key] = slot->id;
          sessions[slot->id] = std::move(slot);
        } catch (std::exception const& err) {
          log_warning("ignoring session " + e.path().string() + ": " + err.what());
        }
      }
    }
  }

  DatasetSlot& dataset_slot(std::string const& id) {
    std::lock_guard lock(mu);
    if (auto it = datasets.find(id); it != datasets.end()) return *it->second;
    auto root = cfg.data_root / id;
    if (id.empty() || id.find('/') != std::string::npos || id == "." || id == ".." ||
        !fs::is_directory(root / "images")) {
      throw Error(ErrorCode::kNotFound, "unknown dataset", id);
    }
    auto slot = std::make_unique<DatasetSlot>();
    slot->dataset = std::make_unique<Dataset>(Dataset::open(root, cfg.pipeline));
    return *(datasets[id] = std::move(slot));
  }

  static SessionPools const& pools_of(DatasetSlot& d) {
    if (!d.pools) d.pools = d.dataset->session_pools();
    return *d.pools;
  }

  static void index_proposals(DatasetSlot& d) {
    if (!d.proposals.empty()) return;
    for (auto& p : d.dataset->proposals()) d.proposals.emplace(p.proposal_id, p);
  }

  std::shared_ptr<SessionSlot> session_slot(std::string const& id) {
    std::lock_guard lock(mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(ErrorCode::kNotFound, "unknown session", id);
    return it->second;
  }

  // Caller holds slot.mu.
  Session& loaded(SessionSlot& s) {
    if (s.session) return *s.session;
    auto meta = json::parse(bytes::read_text(s.dir / "session.json"));
    auto& d = dataset_slot(s.dataset_id);
    std::lock_guard dlock(d.mu);
    auto const& pools = pools_of(d);
    if (meta.at("positives").get<std::vector<std::string>>() != pools.positives.ids ||
        meta.at("negatives").get<std::vector<std::string>>() != pools.negatives.ids) {
      throw Error(ErrorCode::kConflict, "dataset pools changed since the session was created", s.id);
    }
    auto scfg = session_config(pools);
    scfg.query_size = meta.at("query_size").get<int>();
    auto session = std::make_unique<Session>(s.id, pools.positives, pools.negatives, scfg,
                                             meta.at("exemplar_order").get<std::vector<std::string>>());
    std::vector<FeedbackEvent> events;
    if (fs::exists(s.dir / "log.jsonl")) {
      std::istringstream in(bytes::read_text(s.dir / "log.jsonl"));
      for (std::string line; std::getline(in, line);) {
        if (!line.empty()) events.push_back(feedback_event_from_json(line));
      }
    }
    session->restore(events);
    if (fs::exists(s.dir / "finalized.json")) {
      auto f = json::parse(bytes::read_text(s.dir / "finalized.json"));
      if (f.at("log_length").get<std::size_t>() == session->log().size()) {
        s.finalized_at = session->log().size();
      }
    }
    s.session = std::move(session);
    return *s.session;
  }

  SessionConfig session_config(SessionPools const& pools) const {
    auto c = cfg.session;
    c.fingerprint = pools.fingerprint;
    return c;
  }

  void persist(SessionSlot& s) {
    std::string log;
    for (auto const& e : s.session->log()) log += to_json_line(e) + "\n";
    bytes::write_text_atomic(s.dir / "log.jsonl", log);
    bytes::write_text_atomic(s.dir / "snapshot.json", s.session->snapshot_json());
  }

  ordered_json record(SessionSlot& s) {
    auto& session = *s.session;
    auto n = session.log().size();
    std::string status = s.finalized_at == n ? "finalized" : session.complete() ? "complete" : "active";
    ordered_json j{{"session_id", s.id},
                   {"dataset_id", s.dataset_id},
                   {"status", status},
                   {"counts", counts_json(session.counts())},
                   {"log_length", n}};
    j["pending_query"] = session.pending_query() ? query_json(*session.pending_query()) : ordered_json(nullptr);
    return j;
  }

  // Ensemble over the current pools scored on the dataset's test rows.
  ordered_json const& evaluate(SessionSlot& s, Finalization* out = nullptr) {
    auto n = s.session->log().size();
    if (s.evaluated_at == n && !out) return s.evaluation;
    auto fin = s.session->finalize();
    auto& d = dataset_slot(s.dataset_id);
    std::vector<ScoredExample> scored;
    {
      std::lock_guard dlock(d.mu);
      auto const& pools = pools_of(d);
      auto det = ensemble_predict(fin.build.ensemble, pools.test);
      for (std::size_t i = 0; i < det.size(); ++i) {
        scored.push_back({det[i].proposal_id, det[i].max_score, pools.test_animal[i]});
      }
    }
    auto pr = pr_curve(scored);
    ordered_json dropped = ordered_json::array();
    for (auto const& dr : fin.build.dropped) {
      dropped.push_back({{"exemplar_id", dr.exemplar_id}, {"reason", dr.reason}});
    }
    s.evaluation = {{"session_id", s.id},
                    {"log_length", n},
                    {"members", fin.build.ensemble.members.size()},
                    {"dropped", dropped},
                    {"counts", counts_json(fin.counts)},
                    {"average_precision", pr.auc},
                    {"recall_at_precision_0.10", recall_at_precision(pr, 0.10)},
                    {"curve", curve_json(pr)}};
    s.evaluated_at = n;
    if (out) *out = std::move(fin);
    return s.evaluation;
  }

  HttpResponse ok(ordered_json const& j, int status = 200) { return {status, "application/json", j.dump()}; }

  HttpResponse list_datasets() {
    ordered_json out = ordered_json::array();
    for (auto const& id : dataset_dirs()) {
      try {
        auto& d = dataset_slot(id);
        std::lock_guard dlock(d.mu);
        auto const& m = d.dataset->manifest();
        std::size_t n_sessions = 0;
        {
          std::lock_guard lock(mu);
          for (auto const& [sid, s] : sessions) n_sessions += s->dataset_id == id;
        }
        out.push_back({{"dataset_id", m.dataset_id},
                       {"images", m.images.size()},
                       {"annotation_files", m.annotation_files.size()},
                       {"derived", m.derived},
                       {"sessions", n_sessions}});
      } catch (Error const& e) {
        log_warning("skipping dataset " + id + ": " + e.what());
      }
    }
    return ok(out);
  }

  HttpResponse run_pipeline(std::string const& id, json const& body) {
    std::vector<std::string> stages{"fuse", "proposals", "codebook", "features", "train"};
    if (body.contains("stages")) {
      try {
        stages = body.at("stages").get<std::vector<std::string>>();
      } catch (json::exception const& e) {
        throw_invalid("stages must be a list of stage names", e.what());
      }
    }
    auto& d = dataset_slot(id);
    std::lock_guard dlock(d.mu);
    auto summary = d.dataset->run_stages(stages);
    // Ground truth may have moved; rebuild lazily.
    d.pools.reset();
    d.proposals.clear();
    d.working_images.clear();
    return {200, "application/json", summary};
  }

  HttpResponse create_session(json const& body) {
    auto dataset_id = text_field(body, "dataset_id", true);
    auto key = text_field(body, "idempotency_key", false);
    if (!key.empty()) {
      std::string existing;
      {
        std::lock_guard lock(mu);
        if (auto it = creation_keys.find(key); it != creation_keys.end()) existing = it->second;
      }
      if (!existing.empty()) {
        auto s = session_slot(existing);
        std::lock_guard slock(s->mu);
        if (s->dataset_id != dataset_id) {
          throw Error(ErrorCode::kConflict, "idempotency key reused for another dataset", key);
        }
        loaded(*s);
        return ok(record(*s));
      }
    }
    auto& d = dataset_slot(dataset_id);
    std::unique_lock dlock(d.mu);
    auto const& pools = pools_of(d);
    auto slot = std::make_shared<SessionSlot>();
    slot->dataset_id = dataset_id;
    // Held before the slot is published so readers wait for construction.
    std::lock_guard slock(slot->mu);
    {
      std::lock_guard lock(mu);
      if (!key.empty() && creation_keys.contains(key)) {
        throw Error(ErrorCode::kConflict, "concurrent session creation with one key", key);
      }
      int n = 1;
      while (sessions.contains(dataset_id + "-s" + std::to_string(n))) ++n;
      slot->id = dataset_id + "-s" + std::to_string(n);
      slot->dir = cfg.data_root / dataset_id / "sessions" / slot->id;
      sessions[slot->id] = slot;
      if (!key.empty()) creation_keys[key] = slot->id;
    }
    try {
      slot->session = std::make_unique<Session>(slot->id, pools.positives, pools.negatives,
                                                session_config(pools));
      fs::create_directories(slot->dir);
      ordered_json meta{{"session_id", slot->id},
                        {"dataset_id", dataset_id},
                        {"idempotency_key", key},
                        {"query_size", slot->session->config().query_size},
                        {"fingerprint", pools.fingerprint},
                        {"exemplar_order", slot->session->exemplar_order()},
                        {"positives", pools.positives.ids},
                        {"negatives", pools.negatives.ids}};
      bytes::write_text_atomic(slot->dir / "session.json", meta.dump(2));
      persist(*slot);
    } catch (...) {
      std::lock_guard lock(mu);
      sessions.erase(slot->id);
      if (!key.empty()) creation_keys.erase(key);
      throw;
    }
    dlock.unlock();
    return ok(record(*slot), 201);
  }

  HttpResponse session_route(std::string const& method, std::string const& sid,
                             std::string const& action, json const& body) {
    auto s = session_slot(sid);
    std::lock_guard slock(s->mu);
    auto& session = loaded(*s);
    if (action.empty() && method == "GET") return ok(record(*s));
    if (action == "query" && method == "GET") {
      auto q = session.pending_query() ? *session.pending_query() : session.next_query();
      return ok(query_json(q));
    }
    if (action == "feedback" && method == "POST") {
      auto key = text_field(body, "idempotency_key", true);
      if (!body.contains("verdicts") || !body["verdicts"].is_array()) {
        throw_invalid("verdicts must be a list");
      }
      std::vector<Verdict> verdicts;
      for (auto const& v : body["verdicts"]) verdicts.push_back(parse_verdict(v));
      auto rep = session.apply_feedback(verdicts, key, utc_now());
      if (!rep.replayed) persist(*s);
      ordered_json j{{"query_id", rep.query_id},
                     {"background", rep.background},
                     {"promoted", rep.promoted},
                     {"removed_unclear", rep.removed_unclear},
                     {"removed_animal", rep.removed_animal},
                     {"replayed", rep.replayed},
                     {"counts", counts_json(rep.counts)},
                     {"session", record(*s)}};
      return ok(j);
    }
    if (action == "finalize" && method == "POST") {
      auto n = session.log().size();
      if (s->finalized_at != n) {
        Finalization fin;
        evaluate(*s, &fin);
        save_ensemble(s->dir / "model.bin", fin.build.ensemble);
        bytes::write_text_atomic(s->dir / "finalized.json", s->evaluation.dump(2));
        s->finalized_at = n;
      } else {
        evaluate(*s);
      }
      auto j = s->evaluation;
      j["session"] = record(*s);
      return ok(j);
    }
    if (action == "metrics" && method == "GET") {
      auto j = evaluate(*s);
      j["status"] = record(*s)["status"];
      return ok(j);
    }
    if (action == "audit" && method == "GET") {
      auto replayed = session.replay(session.log());
      std::set<int> batches;
      for (auto const& e : session.log()) batches.insert(e.batch);
      std::set<std::string> keys;
      for (auto const& e : session.log()) keys.insert(e.idempotency_key);
      ordered_json disk_log = static_cast<std::int64_t>(-1);
      if (fs::exists(s->dir / "log.jsonl")) {
        std::int64_t lines = 0;
        std::istringstream in(bytes::read_text(s->dir / "log.jsonl"));
        for (std::string line; std::getline(in, line);) lines += !line.empty();
        disk_log = lines;
      }
      ordered_json j{{"session_id", s->id},
                     {"consistent", replayed == session.state() &&
                                        counts_of(replayed) == session.counts()},
                     {"log_events", session.log().size()},
                     {"persisted_events", disk_log},
                     {"batches", batches.size()},
                     {"idempotency_keys", keys.size()},
                     {"counts", counts_json(session.counts())},
                     {"replayed_counts", counts_json(counts_of(replayed))}};
      return ok(j);
    }
    if (action.empty() || action == "query" || action == "feedback" || action == "finalize" ||
        action == "metrics" || action == "audit") {
      throw Error(ErrorCode::kInvalidArgument, "method not allowed", method + " /sessions/" + sid + "/" + action);
    }
    throw Error(ErrorCode::kNotFound, "unknown route", "/sessions/" + sid + "/" + action);
  }

  HttpResponse chip(std::string const& proposal_id) {
    for (auto const& id : dataset_dirs()) {
      if (!fs::exists(cfg.data_root / id / "derived" / "proposals.csv")) continue;
      auto& d = dataset_slot(id);
      std::lock_guard dlock(d.mu);
      index_proposals(d);
      auto it = d.proposals.find(proposal_id);
      if (it == d.proposals.end()) continue;
      auto const& p = it->second;
      auto img = d.working_images.find(p.image_id);
      if (img == d.working_images.end()) {
        auto native = d.dataset->load_image(p.image_id);
        int f = resample_factor(native.gsd_cm(), cfg.pipeline.proposals.working_gsd_cm);
        img = d.working_images.emplace(p.image_id, downsample(native, f)).first;
      }
      auto crop = crop_centered(img->second, p.centroid, cfg.chip_size);
      auto png = encode_png(crop);
      return {200, "image/png", std::string(png.begin(), png.end())};
    }
    throw Error(ErrorCode::kNotFound, "unknown proposal", proposal_id);
  }

  HttpResponse route(std::string const& method, std::string_view path, std::string_view raw_body) {
    auto parts = split_path(path);
    if (method != "GET" && method != "POST") {
      throw Error(ErrorCode::kInvalidArgument, "method not allowed", method);
    }
    json body = method == "POST" ? parse_body(raw_body) : json::object();
    if (parts.size() == 1 && parts[0] == "datasets" && method == "GET") return list_datasets();
    if (parts.size() == 3 && parts[0] == "datasets" && parts[2] == "pipeline" && method == "POST") {
      return run_pipeline(parts[1], body);
    }
    if (parts.size() == 1 && parts[0] == "sessions" && method == "POST") return create_session(body);
    if ((parts.size() == 2 || parts.size() == 3) && parts[0] == "sessions") {
      return session_route(method, parts[1], parts.size() == 3 ? parts[2] : "", body);
    }
    if (parts.size() == 2 && parts[0] == "chips" && method == "GET") return chip(parts[1]);
    throw Error(ErrorCode::kNotFound, "unknown route", method + " " + std::string(path));
  }
};

Service::Service(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {
  // No SO_REUSEPORT: a port already in use must fail the bind.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<char const*>(&yes), sizeof yes);
  });
  impl_->server.Get(R"(/.*)", [this](httplib::Request const& req, httplib::Response& res) {
    auto r = handle("GET", req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
  impl_->server.Post(R"(/.*)", [this](httplib::Request const& req, httplib::Response& res) {
    auto r = handle("POST", req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
}

Service::~Service() { stop(); }

HttpResponse Service::handle(std::string_view method, std::string_view path, std::string_view body) {
  try {
    return impl_->route(std::string(method), path, body);
  } catch (Error const& e) {
    return {http_status(e.code()), "application/json", error_body(e.code(), e.what(), e.detail())};
  } catch (json::exception const& e) {
    return {400, "application/json", error_body(ErrorCode::kInvalidArgument, "malformed request", e.what())};
  } catch (std::exception const& e) {
    log(LogLevel::kError, std::string("request failed: ") + e.what());
    return {500, "application/json", error_body(ErrorCode::kInternal, e.what())};
  }
}

int Service::bind(std::string const& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                        : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error(ErrorCode::kIoError, "cannot bind address", host + ":" + std::to_string(port));
  }
  return bound;
}

void Service::listen() {
  if (!impl_->server.listen_after_bind()) {
    throw Error(ErrorCode::kIoError, "server stopped unexpectedly");
  }
}

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace savanna
