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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "savanna/active_learning.hpp"
#include "savanna/error.hpp"

namespace savanna {
namespace {

// Positives cluster around +3 on the first axis; the negative pool hides a
// few animals drawn from the same cluster.
struct Toy {
  FeatureMatrix positives, negatives;
  std::map<std::string, bool> oracle;
  std::set<std::string> hidden;
};

Toy make_toy(int n_pos, int n_neg, int n_hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.6);
  int const d = 4;
  Toy t;
  t.positives.values.resize(n_pos, d);
  t.negatives.values.resize(n_neg, d);
  for (int i = 0; i < n_pos; ++i) {
    for (int j = 0; j < d; ++j) t.positives.values(i, j) = g(rng) + (j == 0 ? 3.0 : 0.0);
    t.positives.ids.push_back("pos" + std::to_string(i));
    t.oracle[t.positives.ids.back()] = true;
  }
  for (int i = 0; i < n_neg; ++i) {
    bool animal = i < n_hidden;
    for (int j = 0; j < d; ++j) t.negatives.values(i, j) = g(rng) + (j == 0 ? (animal ? 3.0 : -1.0) : 0.0);
    char name[16];
    std::snprintf(name, sizeof name, "neg%03d", i);
    t.negatives.ids.push_back(name);
    t.oracle[name] = animal;
    if (animal) t.hidden.insert(name);
  }
  return t;
}

SessionConfig small_cfg(int q = 5) {
  SessionConfig c;
  c.query_size = q;
  return c;
}

std::vector<Verdict> background_for(Query const& q) {
  std::vector<Verdict> v;
  for (auto const& item : q.items) v.push_back({item.proposal_id, Decision::kBackground, false});
  return v;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (Error const& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

TEST(Session, QueryListsTopScoringUnjudgedNegatives) {
  auto t = make_toy(3, 40, 0, 1);
  Session s("s", t.positives, t.negatives, small_cfg());
  auto q = s.next_query();
  ASSERT_EQ(q.items.size(), 5u);
  EXPECT_EQ(q.exemplar_id, s.exemplar_order().front());
  auto model = s.model_for(q.exemplar_id);
  std::vector<double> all;
  for (Eigen::Index i = 0; i < t.negatives.values.rows(); ++i) {
    all.push_back(model.score(t.negatives.values.row(i).transpose()));
  }
  std::sort(all.rbegin(), all.rend());
  for (std::size_t i = 0; i < q.items.size(); ++i) EXPECT_DOUBLE_EQ(q.items[i].score, all[i]);
  EXPECT_EQ(q.items[0].chip, "/chips/" + q.items[0].proposal_id);
  EXPECT_EQ(code_of([&] { s.next_query(); }), ErrorCode::kConflict);
}

TEST(Session, MostConfusedExemplarFirst) {
  auto t = make_toy(4, 30, 0, 2);
  Session s("s", t.positives, t.negatives, small_cfg());
  std::vector<long> counts;
  for (auto const& id : s.exemplar_order()) {
    auto m = s.model_for(id);
    long c = 0;
    for (Eigen::Index i = 0; i < t.negatives.values.rows(); ++i) {
      c += m.raw_score(t.negatives.values.row(i).transpose()) > -1.0;
    }
    counts.push_back(c);
  }
  EXPECT_TRUE(std::is_sorted(counts.rbegin(), counts.rend()));
  SessionConfig ins = small_cfg();
  ins.order = ExemplarOrder::kInsertion;
  EXPECT_EQ(Session("s", t.positives, t.negatives, ins).exemplar_order(), t.positives.ids);
}

TEST(Session, VerdictsMovePoolsAsDecided) {
  auto t = make_toy(3, 30, 0, 3);
  Session s("s", t.positives, t.negatives, small_cfg(4));
  auto q = s.next_query();
  std::vector<Verdict> v{{q.items[0].proposal_id, Decision::kAnimal, true},
                         {q.items[1].proposal_id, Decision::kAnimal, false},
                         {q.items[2].proposal_id, Decision::kUnclear, false},
                         {q.items[3].proposal_id, Decision::kBackground, false}};
  auto rep = s.apply_feedback(v, "k1", "2026-01-01T00:00:00Z");
  EXPECT_EQ(rep.promoted, 1u);
  EXPECT_EQ(rep.removed_animal, 1u);
  EXPECT_EQ(rep.removed_unclear, 1u);
  EXPECT_EQ(rep.background, 1u);
  EXPECT_FALSE(rep.replayed);
  auto c = s.counts();
  EXPECT_EQ(c.positives, 4u);
  EXPECT_EQ(c.negatives, 27u);
  EXPECT_EQ(c.queries_answered, 1u);
  EXPECT_EQ(s.promoted_ids(), (std::vector<std::string>{q.items[0].proposal_id}));
  auto removed = s.removed();
  EXPECT_EQ(removed.at(q.items[1].proposal_id), RemovalReason::kAnimalNotPromoted);
  EXPECT_EQ(removed.at(q.items[2].proposal_id), RemovalReason::kUnclear);
  ASSERT_EQ(s.log().size(), 4u);
  EXPECT_EQ(s.log()[0].batch, 0);
  EXPECT_EQ(s.log()[0].idempotency_key, "k1");
  // Judged negatives never come back; promoted animals do not join the
  // exemplar queue.
  auto q2 = s.next_query();
  for (auto const& item : q2.items) EXPECT_NE(item.proposal_id, q.items[3].proposal_id);
  EXPECT_EQ(s.exemplar_order().size(), 3u);
  EXPECT_EQ(q2.exemplar_id, s.exemplar_order()[1]);
}

TEST(Session, FeedbackValidation) {
  auto t = make_toy(2, 20, 0, 4);
  Session s("s", t.positives, t.negatives, small_cfg(3));
  std::vector<Verdict> none;
  EXPECT_EQ(code_of([&] { s.apply_feedback(none); }), ErrorCode::kConflict);
  auto q = s.next_query();
  EXPECT_EQ(code_of([&] { s.apply_feedback(none); }), ErrorCode::kInvalidArgument);
  std::set<std::string> in;
  for (auto const& i : q.items) in.insert(i.proposal_id);
  std::string outside;
  for (auto const& id : t.negatives.ids) {
    if (!in.count(id)) outside = id;
  }
  std::vector<Verdict> stray{{outside, Decision::kBackground, false}};
  EXPECT_EQ(code_of([&] { s.apply_feedback(stray); }), ErrorCode::kVerdictNotInQuery);
  std::vector<Verdict> dup{{q.items[0].proposal_id, Decision::kBackground, false},
                           {q.items[0].proposal_id, Decision::kAnimal, false}};
  EXPECT_EQ(code_of([&] { s.apply_feedback(dup); }), ErrorCode::kInvalidArgument);
  EXPECT_TRUE(s.log().empty());
  EXPECT_TRUE(s.pending_query().has_value());
}

TEST(Session, IdempotentRetry) {
  auto t = make_toy(2, 20, 0, 5);
  Session s("s", t.positives, t.negatives, small_cfg(3));
  auto q = s.next_query();
  auto v = background_for(q);
  auto first = s.apply_feedback(v, "key");
  auto state = s.state();
  auto again = s.apply_feedback(v, "key");
  EXPECT_TRUE(again.replayed);
  EXPECT_EQ(again.counts, first.counts);
  EXPECT_EQ(s.state(), state);
  EXPECT_EQ(s.log().size(), 3u);
  auto other = v;
  other[0].decision = Decision::kUnclear;
  EXPECT_EQ(code_of([&] { s.apply_feedback(other, "key"); }), ErrorCode::kConflict);
}

TEST(Session, ReplayAndRestoreReproducePools) {
  auto t = make_toy(3, 40, 4, 6);
  Session s("s", t.positives, t.negatives, small_cfg(4));
  simulate_user(s, t.oracle, 2);
  EXPECT_EQ(s.replay(s.log()), s.state());
  Session fresh("s", t.positives, t.negatives, small_cfg(4), s.exemplar_order());
  EXPECT_EQ(fresh.initial_state(), s.initial_state());
  fresh.restore(s.log());
  EXPECT_EQ(fresh.state(), s.state());
  EXPECT_EQ(fresh.counts(), s.counts());
  EXPECT_EQ(fresh.log().size(), s.log().size());
  EXPECT_EQ(fresh.snapshot_json(), s.snapshot_json());
  EXPECT_EQ(fresh.next_query().exemplar_id, s.next_query().exemplar_id);
}

TEST(Session, CompletesAfterEveryExemplar) {
  auto t = make_toy(2, 30, 0, 7);
  Session s("s", t.positives, t.negatives, small_cfg(3));
  for (int i = 0; i < 2; ++i) {
    auto q = s.next_query();
    s.apply_feedback(background_for(q));
  }
  EXPECT_TRUE(s.complete());
  EXPECT_EQ(code_of([&] { s.next_query(); }), ErrorCode::kSessionComplete);
}

TEST(Session, FinalizeTrainsOnCurrentPools) {
  auto t = make_toy(2, 30, 3, 8);
  Session s("s", t.positives, t.negatives, small_cfg(4));
  auto q = s.next_query();
  std::vector<Verdict> v{{q.items[0].proposal_id, Decision::kAnimal, true}};
  s.apply_feedback(v);
  auto fin = s.finalize();
  EXPECT_EQ(fin.build.ensemble.members.size() + fin.build.dropped.size(), 3u);
  EXPECT_EQ(fin.counts, s.counts());
  for (auto const& m : fin.build.ensemble.members) {
    Eigen::Index row = -1;
    for (std::size_t i = 0; i < t.positives.ids.size(); ++i) {
      if (t.positives.ids[i] == m.exemplar_id) row = static_cast<Eigen::Index>(i);
    }
    Vector x = row >= 0 ? Vector(t.positives.values.row(row).transpose()) : Vector();
    if (row < 0) {
      for (std::size_t i = 0; i < t.negatives.ids.size(); ++i) {
        if (t.negatives.ids[i] == m.exemplar_id) x = t.negatives.values.row(static_cast<Eigen::Index>(i)).transpose();
      }
    }
    EXPECT_NEAR(m.score(x), 1.0, 1e-9);
  }
}

TEST(Session, RejectsBadConstruction) {
  auto t = make_toy(2, 5, 0, 9);
  auto dup = t.negatives;
  dup.ids[0] = t.positives.ids[0];
  EXPECT_THROW(Session("s", t.positives, dup, small_cfg()), Error);
  std::vector<std::string> partial{t.positives.ids[0]};
  EXPECT_THROW(Session("s", t.positives, t.negatives, small_cfg(), partial), Error);
}

TEST(SimulateUser, RecoversHiddenAnimals) {
  auto t = make_toy(5, 200, 10, 10);
  Session s("s", t.positives, t.negatives, small_cfg(8));
  auto rep = simulate_user(s, t.oracle, 50);
  EXPECT_LE(rep.queries, 5u);
  EXPECT_GE(rep.recovered_false_negatives, 8u);
  for (auto const& id : rep.recovered_ids) EXPECT_TRUE(t.hidden.count(id));
  EXPECT_EQ(rep.animals_found, rep.recovered_false_negatives);
  EXPECT_EQ(s.counts().promoted, rep.recovered_false_negatives);
  auto partial = t.oracle;
  partial.erase(t.negatives.ids[15]);
  Session s2("s", t.positives, t.negatives, small_cfg(200));
  EXPECT_THROW(simulate_user(s2, partial, 1), Error);
}

TEST(FeedbackEvent, JsonLineRoundTrip) {
  FeedbackEvent e{7, 2, "s:q3", "pos1", "abc", "2026-10-14T10:00:00Z", {"img:p4", Decision::kAnimal, true}};
  auto line = to_json_line(e);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  auto back = feedback_event_from_json(line);
  EXPECT_EQ(back.sequence, 7);
  EXPECT_EQ(back.batch, 2);
  EXPECT_EQ(back.query_id, "s:q3");
  EXPECT_EQ(back.idempotency_key, "abc");
  EXPECT_EQ(back.verdict, e.verdict);
  EXPECT_THROW(feedback_event_from_json("{"), Error);
  EXPECT_EQ(parse_decision(to_string(Decision::kUnclear)), Decision::kUnclear);
  EXPECT_THROW(parse_decision("maybe"), Error);
}

}  // namespace
}  // namespace savanna
