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

#ifndef SAVANNA_ACTIVE_LEARNING_HPP_
#define SAVANNA_ACTIVE_LEARNING_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "savanna/detector.hpp"
#include "savanna/features.hpp"

namespace savanna {

enum class Decision { kBackground, kAnimal, kUnclear };
std::string_view to_string(Decision d);
Decision parse_decision(std::string_view text);

struct Verdict {
  std::string proposal_id;
  Decision decision = Decision::kBackground;
  /// Only meaningful with kAnimal.
  bool promote_to_exemplar = false;
  friend bool operator==(Verdict const&, Verdict const&) = default;
};

struct QueryItem {
  std::string proposal_id;
  double score = 0.0;
  std::string chip;
};

struct Query {
  std::string query_id;
  std::string exemplar_id;
  /// Sorted by score descending, then proposal id ascending.
  std::vector<QueryItem> items;
};

enum class ExemplarOrder {
  /// Most negatives inside the exemplar's margin (raw score > -1) first.
  kMostConfused,
  kInsertion,
};

struct SessionConfig {
  ExemplarOptions exemplar;
  bool other_positives_as_negatives = true;
  ExemplarOrder order = ExemplarOrder::kMostConfused;
  int query_size = 8;
  std::string fingerprint;
};

enum class Membership { kPositive, kNegative, kRemoved };
enum class RemovalReason { kNone, kUnclear, kAnimalNotPromoted };
std::string_view to_string(RemovalReason r);

/// One verdict as recorded in the append-only log. A batch is the set of
/// verdicts answering one query.
struct FeedbackEvent {
  std::int64_t sequence = 0;
  int batch = 0;
  std::string query_id;
  std::string exemplar_id;
  std::string idempotency_key;
  std::string timestamp;
  Verdict verdict;
};

std::string to_json_line(FeedbackEvent const& e);
FeedbackEvent feedback_event_from_json(std::string_view line);

struct SessionCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t promoted = 0;
  std::size_t removed_unclear = 0;
  std::size_t removed_animal = 0;
  std::size_t queries_answered = 0;
  friend bool operator==(SessionCounts const&, SessionCounts const&) = default;
};

struct FeedbackReport {
  std::string query_id;
  std::size_t background = 0;
  std::size_t promoted = 0;
  std::size_t removed_unclear = 0;
  std::size_t removed_animal = 0;
  SessionCounts counts;
  /// True when the call was a retry answered from the idempotency record.
  bool replayed = false;
};

/// Pool membership of every proposal the session started with, plus the
/// bookkeeping needed to resume: which exemplars were answered and which
/// proposals were judged.
struct PoolState {
  std::vector<Membership> membership;
  std::vector<RemovalReason> reason;
  std::vector<bool> promoted;
  std::vector<bool> judged;
  std::vector<std::string> processed_exemplars;
  std::size_t queries_answered = 0;
  friend bool operator==(PoolState const&, PoolState const&) = default;
};

struct Finalization {
  EnsembleBuild build;
  SessionCounts counts;
};

/// Single-writer active-learning session over a fixed proposal set. The
/// exemplar queue is the initial positive pool; promoted animals only join
/// the ensemble at finalize.
class Session {
 public:
  /// positives and negatives hold the initial pools; their ids must be
  /// distinct. The exemplar order is computed here unless given.
  Session(std::string session_id, FeatureMatrix const& positives,
          FeatureMatrix const& negatives, SessionConfig cfg,
          std::optional<std::vector<std::string>> exemplar_order = std::nullopt);

  std::string const& id() const { return id_; }
  SessionConfig const& config() const { return cfg_; }

  /// Throws kConflict with a pending query and kSessionComplete once every
  /// exemplar has been answered or every negative has been judged.
  Query next_query();
  std::optional<Query> const& pending_query() const { return pending_; }
  bool complete() const;

  /// Applies verdicts for the pending query. Reusing an idempotency key
  /// returns the recorded report without touching state; reusing it with
  /// different verdicts is a conflict.
  FeedbackReport apply_feedback(std::span<Verdict const> verdicts,
                                std::string idempotency_key = {},
                                std::string timestamp = {});

  /// Fresh ensemble over the current pools. Empty positive or negative
  /// pools throw kTrainingFailure.
  Finalization finalize() const;

  SessionCounts counts() const;
  PoolState const& state() const { return state_; }
  PoolState const& initial_state() const { return initial_; }
  std::vector<FeedbackEvent> const& log() const { return log_; }
  std::vector<std::string> const& exemplar_order() const { return order_; }
  std::vector<std::string> const& proposal_ids() const { return ids_; }

  std::vector<std::string> positive_ids() const;
  std::vector<std::string> negative_ids() const;
  std::map<std::string, RemovalReason> removed() const;
  /// Proposals promoted to exemplars, in promotion order.
  std::vector<std::string> promoted_ids() const;

  /// Current model of an exemplar, trained against the current pools.
  ExemplarModel model_for(std::string const& exemplar_id);

  /// Replays log events over the initial state. Pure bookkeeping: no model
  /// is trained.
  PoolState replay(std::span<FeedbackEvent const> events) const;

  /// Restores an interrupted session: events are replayed on top of the
  /// initial pools and appended to the log.
  void restore(std::span<FeedbackEvent const> events);

  /// Snapshot of pools and bookkeeping, keyed by proposal id.
  std::string snapshot_json() const;

 private:
  std::size_t row_of(std::string const& proposal_id) const;
  std::vector<Eigen::Index> negatives_for(std::size_t exemplar_row) const;
  void apply_event(PoolState& s, FeedbackEvent const& e) const;
  std::size_t next_exemplar() const;

  std::string id_;
  SessionConfig cfg_;
  Matrix data_;
  std::vector<std::string> ids_;
  std::map<std::string, std::size_t> row_;
  std::vector<std::string> order_;
  PoolState initial_;
  PoolState state_;
  std::optional<Query> pending_;
  std::vector<FeedbackEvent> log_;
  std::int64_t pool_version_ = 0;
  std::map<std::size_t, std::pair<std::int64_t, ExemplarModel>> cache_;
  std::map<std::string, std::pair<std::vector<Verdict>, FeedbackReport>> idempotency_;
  int query_counter_ = 0;
};

struct SimulationReport {
  std::size_t queries = 0;
  std::size_t verdicts = 0;
  std::size_t animals_found = 0;
  std::size_t recovered_false_negatives = 0;
  std::vector<std::string> recovered_ids;
};

/// Answers up to budget queries from an oracle (proposal id -> is animal),
/// promoting every animal. recovered_false_negatives counts animals found
/// that started in the negative pool. Ids missing from the oracle throw.
SimulationReport simulate_user(Session& session,
                               std::map<std::string, bool> const& oracle,
                               std::size_t budget);

}  // namespace savanna

#endif  // SAVANNA_ACTIVE_LEARNING_HPP_
