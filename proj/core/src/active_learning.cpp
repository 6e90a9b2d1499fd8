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

#include "savanna/active_learning.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "savanna/error.hpp"
#include "savanna/log.hpp"

namespace savanna {
namespace {

using nlohmann::ordered_json;

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::kBackground:
      return "background";
    case Decision::kAnimal:
      return "animal";
    case Decision::kUnclear:
      return "unclear";
  }
  return "background";
}

Decision parse_decision(std::string_view text) {
  if (text == "background") return Decision::kBackground;
  if (text == "animal") return Decision::kAnimal;
  if (text == "unclear") return Decision::kUnclear;
  throw_invalid("unknown decision", std::string(text));
}

std::string_view to_string(RemovalReason r) {
  switch (r) {
    case RemovalReason::kNone:
      return "none";
    case RemovalReason::kUnclear:
      return "unclear";
    case RemovalReason::kAnimalNotPromoted:
      return "animal_not_promoted";
  }
  return "none";
}

std::string to_json_line(FeedbackEvent const& e) {
  ordered_json j;
  j["seq"] = e.sequence;
  j["batch"] = e.batch;
  j["query_id"] = e.query_id;
  j["exemplar_id"] = e.exemplar_id;
  j["idempotency_key"] = e.idempotency_key;
  j["timestamp"] = e.timestamp;
  j["proposal_id"] = e.verdict.proposal_id;
  j["decision"] = to_string(e.verdict.decision);
  j["promote"] = e.verdict.promote_to_exemplar;
  return j.dump();
}

FeedbackEvent feedback_event_from_json(std::string_view line) {
  try {
    auto j = nlohmann::json::parse(line);
    FeedbackEvent e;
    e.sequence = j.at("seq").get<std::int64_t>();
    e.batch = j.at("batch").get<int>();
    e.query_id = j.at("query_id").get<std::string>();
    e.exemplar_id = j.at("exemplar_id").get<std::string>();
    e.idempotency_key = j.value("idempotency_key", "");
    e.timestamp = j.value("timestamp", "");
    e.verdict.proposal_id = j.at("proposal_id").get<std::string>();
    e.verdict.decision = parse_decision(j.at("decision").get<std::string>());
    e.verdict.promote_to_exemplar = j.value("promote", false);
    return e;
  } catch (nlohmann::json::exception const& ex) {
    throw_invalid("malformed feedback event", ex.what());
  }
}

Session::Session(std::string session_id, FeatureMatrix const& positives,
                 FeatureMatrix const& negatives, SessionConfig cfg,
                 std::optional<std::vector<std::string>> exemplar_order)
    : id_(std::move(session_id)), cfg_(std::move(cfg)) {
  if (positives.rows() == 0) throw_invalid("session needs at least one positive");
  if (positives.values.cols() != negatives.values.cols() && negatives.rows() > 0) {
    throw_invalid("positive and negative features differ in dimension");
  }
  if (cfg_.query_size < 1) throw_invalid("query size must be >= 1");
  auto const np = static_cast<Eigen::Index>(positives.rows());
  auto const nn = static_cast<Eigen::Index>(negatives.rows());
  data_.resize(np + nn, positives.values.cols());
  data_.topRows(np) = positives.values;
  if (nn > 0) data_.bottomRows(nn) = negatives.values;
  ids_ = positives.ids;
  ids_.insert(ids_.end(), negatives.ids.begin(), negatives.ids.end());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!row_.emplace(ids_[i], i).second) throw_invalid("duplicate proposal id", ids_[i]);
  }
  std::size_t const n = ids_.size();
  initial_.membership.assign(n, Membership::kNegative);
  std::fill_n(initial_.membership.begin(), positives.rows(), Membership::kPositive);
  initial_.reason.assign(n, RemovalReason::kNone);
  initial_.promoted.assign(n, false);
  initial_.judged.assign(n, false);
  state_ = initial_;

  if (exemplar_order) {
    std::set<std::string> seen;
    for (auto const& id : *exemplar_order) {
      auto r = row_of(id);
      if (initial_.membership[r] != Membership::kPositive || !seen.insert(id).second) {
        throw_invalid("exemplar order must list initial positives once", id);
      }
    }
    if (seen.size() != positives.rows()) throw_invalid("exemplar order is incomplete");
    order_ = std::move(*exemplar_order);
  } else {
    order_ = positives.ids;
    if (cfg_.order == ExemplarOrder::kMostConfused) {
      std::vector<std::pair<long, std::size_t>> confusion;
      for (std::size_t p = 0; p < positives.rows(); ++p) {
        auto model = model_for(ids_[p]);
        long count = 0;
        for (std::size_t r = 0; r < n; ++r) {
          if (state_.membership[r] != Membership::kNegative) continue;
          if (model.raw_score(data_.row(static_cast<Eigen::Index>(r)).transpose()) > -1.0) ++count;
        }
        confusion.emplace_back(count, p);
      }
      std::stable_sort(confusion.begin(), confusion.end(),
                       [](auto const& a, auto const& b) { return a.first > b.first; });
      order_.clear();
      for (auto const& [_, p] : confusion) order_.push_back(ids_[p]);
    }
  }
}

std::size_t Session::row_of(std::string const& proposal_id) const {
  auto it = row_.find(proposal_id);
  if (it == row_.end()) throw Error(ErrorCode::kNotFound, "unknown proposal", proposal_id);
  return it->second;
}

std::vector<Eigen::Index> Session::negatives_for(std::size_t exemplar_row) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (r == exemplar_row) continue;
    auto m = state_.membership[r];
    if (m == Membership::kNegative ||
        (m == Membership::kPositive && cfg_.other_positives_as_negatives)) {
      rows.push_back(static_cast<Eigen::Index>(r));
    }
  }
  return rows;
}

ExemplarModel Session::model_for(std::string const& exemplar_id) {
  auto row = row_of(exemplar_id);
  if (auto it = cache_.find(row); it != cache_.end() && it->second.first == pool_version_) {
    return it->second.second;
  }
  auto negatives = negatives_for(row);
  if (negatives.empty()) {
    throw Error(ErrorCode::kTrainingFailure, "no negatives left to train against", exemplar_id);
  }
  ExemplarModel model;
  try {
    model = train_exemplar(data_, static_cast<Eigen::Index>(row), negatives, exemplar_id,
                           cfg_.exemplar);
  } catch (Error const& e) {
    if (e.code() != ErrorCode::kCalibrationFailure) throw;
    // Still usable for ranking: keep raw scores.
    log_warning(std::string("ranking with uncalibrated scores: ") + e.what());
    std::vector<int> y{1};
    Matrix x(static_cast<Eigen::Index>(negatives.size()) + 1, data_.cols());
    x.row(0) = data_.row(static_cast<Eigen::Index>(row));
    for (std::size_t k = 0; k < negatives.size(); ++k) {
      x.row(static_cast<Eigen::Index>(k) + 1) = data_.row(negatives[k]);
      y.push_back(-1);
    }
    SvmOptions o{cfg_.exemplar.c,
                 {static_cast<double>(negatives.size()) * cfg_.exemplar.weight_ratio, 1.0},
                 cfg_.exemplar.tol, cfg_.exemplar.kkt_tol, cfg_.exemplar.max_epochs,
                 cfg_.exemplar.seed};
    model.base = train_linear_svm(x, y, o);
    model.exemplar_id = exemplar_id;
    model.calibration_scale = 1.0;
  }
  cache_[row] = {pool_version_, model};
  return model;
}

std::size_t Session::next_exemplar() const {
  std::set<std::string> done(state_.processed_exemplars.begin(), state_.processed_exemplars.end());
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (!done.contains(order_[i])) return i;
  }
  return order_.size();
}

bool Session::complete() const {
  if (next_exemplar() == order_.size()) return true;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (state_.membership[r] == Membership::kNegative && !state_.judged[r]) return false;
  }
  return true;
}

Query Session::next_query() {
  if (pending_) throw Error(ErrorCode::kConflict, "a query is already pending", pending_->query_id);
  if (complete()) {
    throw Error(ErrorCode::kSessionComplete,
                "every exemplar has been reviewed or no unjudged negatives remain", id_);
  }
  auto next = next_exemplar();
  auto const& exemplar = order_[next];
  auto model = model_for(exemplar);
  std::vector<QueryItem> items;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (state_.membership[r] != Membership::kNegative || state_.judged[r]) continue;
    items.push_back({ids_[r], model.score(data_.row(static_cast<Eigen::Index>(r)).transpose()),
                     "/chips/" + ids_[r]});
  }
  auto order = [](QueryItem const& a, QueryItem const& b) {
    return a.score != b.score ? a.score > b.score : a.proposal_id < b.proposal_id;
  };
  auto keep = std::min<std::size_t>(items.size(), static_cast<std::size_t>(cfg_.query_size));
  std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(keep), items.end(), order);
  items.resize(keep);
  pending_ = Query{id_ + ":q" + std::to_string(state_.queries_answered + 1), exemplar, std::move(items)};
  return *pending_;
}

void Session::apply_event(PoolState& s, FeedbackEvent const& e) const {
  auto batch = static_cast<std::size_t>(e.batch);
  if (e.batch < 0 || batch > s.queries_answered || batch + 1 < s.queries_answered) {
    throw_invalid("feedback event out of order", std::to_string(e.sequence));
  }
  if (batch == s.queries_answered) {
    s.processed_exemplars.push_back(e.exemplar_id);
    ++s.queries_answered;
  }
  auto r = row_of(e.verdict.proposal_id);
  if (s.membership[r] != Membership::kNegative) {
    throw_invalid("verdict for a proposal outside the negative pool", e.verdict.proposal_id);
  }
  s.judged[r] = true;
  switch (e.verdict.decision) {
    case Decision::kBackground:
      break;
    case Decision::kAnimal:
      if (e.verdict.promote_to_exemplar) {
        s.membership[r] = Membership::kPositive;
        s.promoted[r] = true;
      } else {
        s.membership[r] = Membership::kRemoved;
        s.reason[r] = RemovalReason::kAnimalNotPromoted;
      }
      break;
    case Decision::kUnclear:
      s.membership[r] = Membership::kRemoved;
      s.reason[r] = RemovalReason::kUnclear;
      break;
  }
}

FeedbackReport Session::apply_feedback(std::span<Verdict const> verdicts,
                                       std::string idempotency_key, std::string timestamp) {
  if (!idempotency_key.empty()) {
    if (auto it = idempotency_.find(idempotency_key); it != idempotency_.end()) {
      if (!std::equal(verdicts.begin(), verdicts.end(), it->second.first.begin(),
                      it->second.first.end())) {
        throw Error(ErrorCode::kConflict, "idempotency key reused with different verdicts",
                    idempotency_key);
      }
      FeedbackReport again = it->second.second;
      again.replayed = true;
      return again;
    }
  }
  if (!pending_) throw Error(ErrorCode::kConflict, "no pending query");
  if (verdicts.empty()) throw_invalid("no verdicts given");
  std::set<std::string> in_query, seen;
  for (auto const& item : pending_->items) in_query.insert(item.proposal_id);
  for (auto const& v : verdicts) {
    if (!in_query.contains(v.proposal_id)) {
      throw Error(ErrorCode::kVerdictNotInQuery, "verdict for a proposal outside the pending query",
                  v.proposal_id);
    }
    if (!seen.insert(v.proposal_id).second) {
      throw_invalid("more than one verdict for a proposal", v.proposal_id);
    }
  }

  if (timestamp.empty()) timestamp = utc_now();
  FeedbackReport report;
  report.query_id = pending_->query_id;
  int const batch = static_cast<int>(state_.queries_answered);
  bool changed = false;
  for (auto const& v : verdicts) {
    Verdict vv = v;
    if (vv.decision != Decision::kAnimal) vv.promote_to_exemplar = false;
    FeedbackEvent e{static_cast<std::int64_t>(log_.size()), batch, pending_->query_id,
                    pending_->exemplar_id, idempotency_key, timestamp, vv};
    apply_event(state_, e);
    log_.push_back(std::move(e));
    switch (vv.decision) {
      case Decision::kBackground:
        ++report.background;
        break;
      case Decision::kAnimal:
        ++(vv.promote_to_exemplar ? report.promoted : report.removed_animal);
        changed = true;
        break;
      case Decision::kUnclear:
        ++report.removed_unclear;
        changed = true;
        break;
    }
  }
  auto exemplar = pending_->exemplar_id;
  pending_.reset();
  if (changed) {
    ++pool_version_;
    // The answered exemplar is retrained without the removed proposals.
    model_for(exemplar);
  }
  report.counts = counts();
  if (!idempotency_key.empty()) {
    idempotency_[idempotency_key] = {std::vector<Verdict>(verdicts.begin(), verdicts.end()), report};
  }
  return report;
}

Finalization Session::finalize() const {
  std::vector<std::size_t> pos, neg;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (state_.membership[r] == Membership::kPositive) pos.push_back(r);
    if (state_.membership[r] == Membership::kNegative) neg.push_back(r);
  }
  if (pos.empty()) throw Error(ErrorCode::kTrainingFailure, "positive pool is empty", id_);
  if (neg.empty()) throw Error(ErrorCode::kTrainingFailure, "negative pool is empty", id_);
  auto matrix = [&](std::vector<std::size_t> const& rows) {
    FeatureMatrix m;
    m.values.resize(static_cast<Eigen::Index>(rows.size()), data_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      m.ids.push_back(ids_[rows[i]]);
      m.values.row(static_cast<Eigen::Index>(i)) = data_.row(static_cast<Eigen::Index>(rows[i]));
    }
    return m;
  };
  EnsembleConfig ec{cfg_.exemplar, cfg_.other_positives_as_negatives, cfg_.fingerprint};
  return {build_ensemble(matrix(pos), matrix(neg), ec), counts()};
}

SessionCounts Session::counts() const {
  SessionCounts c;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    switch (state_.membership[r]) {
      case Membership::kPositive:
        ++c.positives;
        break;
      case Membership::kNegative:
        ++c.negatives;
        break;
      case Membership::kRemoved:
        ++(state_.reason[r] == RemovalReason::kUnclear ? c.removed_unclear : c.removed_animal);
        break;
    }
    if (state_.promoted[r]) ++c.promoted;
  }
  c.queries_answered = state_.queries_answered;
  return c;
}

std::vector<std::string> Session::positive_ids() const {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (state_.membership[r] == Membership::kPositive) out.push_back(ids_[r]);
  }
  return out;
}

std::vector<std::string> Session::negative_ids() const {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (state_.membership[r] == Membership::kNegative) out.push_back(ids_[r]);
  }
  return out;
}

std::map<std::string, RemovalReason> Session::removed() const {
  std::map<std::string, RemovalReason> out;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (state_.membership[r] == Membership::kRemoved) out[ids_[r]] = state_.reason[r];
  }
  return out;
}

std::vector<std::string> Session::promoted_ids() const {
  std::vector<std::string> out;
  for (auto const& e : log_) {
    if (e.verdict.decision == Decision::kAnimal && e.verdict.promote_to_exemplar) {
      out.push_back(e.verdict.proposal_id);
    }
  }
  return out;
}

PoolState Session::replay(std::span<FeedbackEvent const> events) const {
  PoolState s = initial_;
  for (auto const& e : events) apply_event(s, e);
  return s;
}

void Session::restore(std::span<FeedbackEvent const> events) {
  if (!log_.empty() || pending_) throw Error(ErrorCode::kConflict, "session already has history", id_);
  state_ = replay(events);
  log_.assign(events.begin(), events.end());
  for (auto const& e : log_) {
    if (e.idempotency_key.empty()) continue;
    auto& [verdicts, report] = idempotency_[e.idempotency_key];
    verdicts.push_back(e.verdict);
    report.query_id = e.query_id;
  }
  for (auto& [_, entry] : idempotency_) entry.second.counts = counts();
  ++pool_version_;
  cache_.clear();
}

std::string Session::snapshot_json() const {
  ordered_json j;
  j["session_id"] = id_;
  j["log_length"] = log_.size();
  j["queries_answered"] = state_.queries_answered;
  j["exemplar_order"] = order_;
  j["processed_exemplars"] = state_.processed_exemplars;
  j["positives"] = positive_ids();
  j["negatives"] = negative_ids();
  auto& removed_j = j["removed"] = ordered_json::object();
  for (auto const& [id, reason] : removed()) removed_j[id] = to_string(reason);
  j["promoted"] = promoted_ids();
  std::vector<std::string> judged;
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (state_.judged[r]) judged.push_back(ids_[r]);
  }
  j["judged"] = judged;
  auto c = counts();
  j["counts"] = {{"positives", c.positives},
                 {"negatives", c.negatives},
                 {"promoted", c.promoted},
                 {"removed_unclear", c.removed_unclear},
                 {"removed_animal", c.removed_animal},
                 {"queries_answered", c.queries_answered}};
  return j.dump(2);
}

SimulationReport simulate_user(Session& session, std::map<std::string, bool> const& oracle,
                               std::size_t budget) {
  SimulationReport rep;
  auto const& initial = session.initial_state();
  auto const& ids = session.proposal_ids();
  std::set<std::string> initially_negative;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (initial.membership[r] == Membership::kNegative) initially_negative.insert(ids[r]);
  }
  while (rep.queries < budget && !session.complete()) {
    auto query = session.pending_query() ? *session.pending_query() : session.next_query();
    std::vector<Verdict> verdicts;
    for (auto const& item : query.items) {
      auto it = oracle.find(item.proposal_id);
      if (it == oracle.end()) throw_invalid("oracle has no label for proposal", item.proposal_id);
      verdicts.push_back({item.proposal_id, it->second ? Decision::kAnimal : Decision::kBackground,
                          it->second});
      if (it->second) {
        ++rep.animals_found;
        if (initially_negative.contains(item.proposal_id)) {
          ++rep.recovered_false_negatives;
          rep.recovered_ids.push_back(item.proposal_id);
        }
      }
    }
    ++rep.queries;
    rep.verdicts += verdicts.size();
    session.apply_feedback(verdicts, "simulated-" + query.query_id);
  }
  return rep;
}

}  // namespace savanna
