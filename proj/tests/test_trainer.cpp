// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "uvcot/error.hpp"
#include "uvcot/datagen.hpp"
#include "uvcot/loss.hpp"
#include "uvcot/synthbench.hpp"
#include "uvcot/rng.hpp"
#include "uvcot/trainer.hpp"

using namespace uvcot;
using namespace uvcot::trainer;

namespace {

std::vector<Query> queries_for(const std::vector<bench::SyntheticTask>& tasks) {
  std::vector<Query> out;
  for (const auto& t : tasks) out.push_back(t.to_query());
  return out;
}

// A pair between two candidate cells of a single-stage task.
PreferencePair cell_pair(const bench::SyntheticTask& t, std::size_t w, std::size_t l, double s_w,
                         double s_l) {
  const auto set = bench::candidate_set(t, 1);
  PreferencePair p;
  p.query_id = t.task_id;
  p.context = ResponseChain{t.task_id, {ChainStep::query(t.question)}};
  p.winner = ScoredResponse::combine(ChainStep::region(set.regions[w]), s_w, 0.0, 0.0);
  p.loser = ScoredResponse::combine(ChainStep::region(set.regions[l]), s_l, 0.0, 0.0);
  p.meta = {0.0, 16};
  return p;
}

TrainConfig train_cfg(double lr, int epochs) {
  TrainConfig c;
  c.learning_rate = lr;
  c.epochs = epochs;
  return c;
}

}  // namespace

TEST_CASE("pair resolution and log-probabilities") {
  const auto t = bench::make_task(4, 4, bench::StageMode::two_stage, 0.9, "t");
  const auto quads = bench::candidate_set(t, 1);
  PreferencePair p;
  p.query_id = "t";
  p.context = ResponseChain{"t", {ChainStep::query(t.question)}};
  p.winner = ScoredResponse::combine(ChainStep::region(quads.regions[2]), 0.7, 0.3, 0.5);
  p.loser = ScoredResponse::combine(ChainStep::region(quads.regions[0]), 0.2, 0.1, 0.5);
  p.meta = {0.5, 8};

  const std::vector<bench::SyntheticTask> one_task{t};
  const PairResolver resolver(one_task);
  const ResolvedPair rp = resolver.resolve(p);
  CHECK(rp.winner_index == 2);
  CHECK(rp.loser_index == 0);
  CHECK(rp.s_w == p.winner.score);
  CHECK(rp.s_l == p.loser.score);

  const ToyPolicy zero(16);
  const auto lp = pair_logps(zero, zero, rp);
  for (double v : {lp.logp_w_policy, lp.logp_w_ref, lp.logp_l_policy, lp.logp_l_ref})
    CHECK(v == doctest::Approx(std::log(0.25)));

  std::vector<double> w(16);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.1 * static_cast<double>(i) - 0.7;
  const ToyPolicy pol(w);
  const auto same = pair_logps(pol, pol, rp);
  CHECK(same.logp_w_policy == same.logp_w_ref);
  CHECK(same.logp_l_policy == same.logp_l_ref);

  // Stage-2 pairs resolve inside the chosen quadrant.
  PreferencePair p2 = p;
  p2.timestep = 2;
  p2.context = p.context.appended(ChainStep::region(quads.regions[3]));
  const auto cells = bench::candidate_set(t, 2, quads.regions[3]);
  p2.winner = ScoredResponse::combine(ChainStep::region(cells.regions[1]), 1.0, 0.0, 0.5);
  p2.loser = ScoredResponse::combine(ChainStep::region(cells.regions[3]), 0.0, 0.0, 0.5);
  CHECK(resolver.resolve(p2).winner_index == 1);

  // Off-grid boxes and unknown queries are skipped, not fatal.
  PreferencePair off = p;
  off.winner = ScoredResponse::combine(ChainStep::region(BoundingBox(0.1, 0.1, 0.3, 0.3)), 0.7, 0.3, 0.5);
  PreferencePair stranger = p;
  stranger.query_id = stranger.context.query_id = "nobody";
  const auto batch = resolver.resolve_all(std::vector{p, off, stranger});
  CHECK(batch.pairs.size() == 1);
  CHECK(batch.skipped.size() == 2);
  try {
    resolver.resolve(off);
    FAIL("expected unresolvable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unresolvable_region);
  }
}

TEST_CASE("training on pairs") {
  const auto tasks = bench::make_tasks(10, 5, 4, bench::StageMode::single, 0.9, "t");
  const PairResolver resolver(tasks);
  std::vector<PreferencePair> pairs;
  for (std::size_t i = 0; i < tasks.size(); ++i) pairs.push_back(cell_pair(tasks[i], i % 16, (i + 3) % 16, 0.9, 0.1 * (i % 5)));
  const auto batch = resolver.resolve_all(pairs).pairs;
  REQUIRE(batch.size() == 10);
  std::vector<double> w0(8);
  for (std::size_t i = 0; i < 8; ++i) w0[i] = 0.05 * static_cast<double>(i);
  const ToyPolicy start(w0);

  SUBCASE("zero learning rate is a no-op") {
    const auto r = train_on_pairs(start, start, batch, train_cfg(0.0, 4));
    CHECK(r.policy == start);
    REQUIRE(r.loss_curve.size() == 5);
    for (double l : r.loss_curve) CHECK(l == r.loss_curve.front());
  }
  SUBCASE("a separable pair drives the loss down every epoch") {
    const auto one = resolver.resolve_all(std::vector{cell_pair(tasks[0], 0, 5, 1.0, 0.0)}).pairs;
    const auto r = train_on_pairs(start, start, one, train_cfg(2.0, 30));
    for (std::size_t e = 1; e < r.loss_curve.size(); ++e) CHECK(r.loss_curve[e] < r.loss_curve[e - 1]);
  }
  SUBCASE("duplicating the batch changes nothing") {
    auto twice = batch;
    twice.insert(twice.end(), batch.begin(), batch.end());
    const auto a = train_on_pairs(start, start, batch, train_cfg(0.5, 6));
    const auto b = train_on_pairs(start, start, twice, train_cfg(0.5, 6));
    for (std::size_t e = 0; e < a.loss_curve.size(); ++e)
      CHECK(b.loss_curve[e] == doctest::Approx(a.loss_curve[e]).epsilon(1e-14));
    for (std::size_t f = 0; f < 8; ++f)
      CHECK(b.policy.weights()[f] == doctest::Approx(a.policy.weights()[f]).epsilon(1e-13));
  }
  SUBCASE("g_scale = 0 follows the DPO loss exactly") {
    auto cfg = train_cfg(0.5, 5);
    cfg.loss.g_scale = 0.0;
    const auto r = train_on_pairs(start, start, batch, cfg);
    ToyPolicy p = start;
    for (int e = 0; e < 5; ++e) {
      double total = 0.0;
      for (const auto& rp : batch) total += loss::dpo_loss(pair_logps(p, start, rp), cfg.loss.beta);
      CHECK(r.loss_curve[static_cast<std::size_t>(e)] == doctest::Approx(total / 10).epsilon(1e-14));
      const auto lg = loss_and_grad(p, start, batch, cfg.loss);
      auto w = p.mutable_weights();
      for (std::size_t f = 0; f < 8; ++f) w[f] -= cfg.learning_rate * lg.grad[f];
    }
  }
  SUBCASE("deterministic") {
    const auto a = train_on_pairs(start, start, batch, train_cfg(0.5, 4));
    const auto b = train_on_pairs(start, start, batch, train_cfg(0.5, 4));
    CHECK(a.policy == b.policy);
    CHECK(a.loss_curve == b.loss_curve);
  }
  CHECK_THROWS_AS(train_on_pairs(start, start, std::vector<ResolvedPair>{}, train_cfg(0.5, 4)), Error);
}

TEST_CASE("weight gradient matches finite differences") {
  Rng rng(8);
  const double h = 1e-5;
  for (int c = 0; c < 100; ++c) {
    const auto tasks = bench::make_tasks(3, rng.next_u64(), 4, bench::StageMode::single, 0.9, "t");
    std::vector<PreferencePair> pairs;
    for (const auto& t : tasks) {
      const std::size_t a = rng.below(16), b = (a + 1 + rng.below(15)) % 16;
      pairs.push_back(cell_pair(t, a, b, rng.uniform(0.5, 1.0), rng.uniform(0.0, 0.5)));
    }
    const auto batch = PairResolver(tasks).resolve_all(pairs).pairs;
    std::vector<double> w(8), wr(8);
    for (auto& x : w) x = rng.uniform(-1, 1);
    for (auto& x : wr) x = rng.uniform(-1, 1);
    loss::LossConfig cfg;
    cfg.beta = rng.uniform(0.05, 1.0);
    cfg.g_scale = rng.uniform(0.0, 2.0);
    const ToyPolicy ref(wr);
    const auto lg = loss_and_grad(ToyPolicy(w), ref, batch, cfg);
    for (std::size_t f = 0; f < 8; ++f) {
      auto wp = w, wm = w;
      wp[f] += h;
      wm[f] -= h;
      const double num =
          (loss_and_grad(ToyPolicy(wp), ref, batch, cfg).mean_loss - loss_and_grad(ToyPolicy(wm), ref, batch, cfg).mean_loss) /
          (2 * h);
      CHECK(std::abs(lg.grad[f] - num) / std::max({std::abs(lg.grad[f]), std::abs(num), 1e-4}) < 1e-5);
    }
  }
}

TEST_CASE("query split") {
  std::vector<Query> qs;
  for (int i = 0; i < 10; ++i) qs.push_back({"q" + std::to_string(i), "?", "null"});
  const auto parts = split_queries(qs, 3, 42);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].size() == 3);
  CHECK(parts[1].size() == 3);
  CHECK(parts[2].size() == 4);
  std::set<std::string> ids;
  for (const auto& part : parts)
    for (const auto& q : part) ids.insert(q.query_id);
  CHECK(ids.size() == 10);
  CHECK(split_queries(qs, 3, 42) == parts);
  CHECK_FALSE(split_queries(qs, 3, 43) == parts);
  CHECK(split_queries(qs, 1, 42)[0].size() == 10);
  CHECK_THROWS_AS(split_queries(qs, 0, 42), Error);
}

TEST_CASE("iterative learning") {
  const auto train_tasks = bench::make_tasks(200, 11, 4, bench::StageMode::single, 0.9, "q");
  const auto eval = bench::make_tasks(300, 12, 4, bench::StageMode::single, 0.9, "e");
  const auto qs = queries_for(train_tasks);
  datagen::DatagenConfig dcfg;
  SimulatedBackend backend(0.05);

  SUBCASE("one iteration") {
    TrainConfig tcfg;
    tcfg.m_iterations = 1;
    const auto r = iterative_learn(ToyPolicy(8), backend, qs, dcfg, tcfg, eval);
    CHECK(r.reports.size() == 1);
    CHECK_FALSE(r.aborted);
  }
  SUBCASE("four iterations improve and stay deterministic") {
    TrainConfig tcfg;
    std::vector<int> seen;
    const auto r = iterative_learn(ToyPolicy(8), backend, qs, dcfg, tcfg, eval,
                                   [&](const IterationReport& rep, const datagen::DatasetResult& data,
                                       const ToyPolicy&) {
                                     seen.push_back(rep.iteration);
                                     CHECK(static_cast<std::size_t>(rep.n_pairs) == data.pairs.size());
                                   });
    REQUIRE(r.reports.size() == 4);
    CHECK(seen == std::vector{1, 2, 3, 4});
    for (std::size_t i = 1; i < 4; ++i) CHECK(r.reports[i].eval_score >= r.reports[i - 1].eval_score - 0.02);
    CHECK(r.reports.back().region_accuracy > bench::evaluate_policy(ToyPolicy(8), eval).region_accuracy);
    const auto again = iterative_learn(ToyPolicy(8), backend, qs, dcfg, tcfg, eval);
    CHECK(again.policy == r.policy);
    CHECK(reports_json(again.reports, "x") == reports_json(r.reports, "x"));
  }
  SUBCASE("initial reference mode runs") {
    TrainConfig tcfg;
    tcfg.ref_mode = RefMode::initial;
    CHECK(iterative_learn(ToyPolicy(8), backend, qs, dcfg, tcfg, eval).reports.size() == 4);
  }
  SUBCASE("an iteration without pairs aborts") {
    auto strict = dcfg;
    strict.min_margin = 5.0;  // no gap can exceed this
    const auto r = iterative_learn(ToyPolicy(8), backend, qs, strict, TrainConfig{}, eval);
    CHECK(r.aborted);
    CHECK(r.reports.empty());
    CHECK(r.abort_reason.find("iteration 1") != std::string::npos);
  }
}

TEST_CASE("gamma matters on two-stage tasks") {
  const auto train_tasks = bench::make_tasks(400, 21, 4, bench::StageMode::two_stage, 0.9, "q");
  const auto eval = bench::make_tasks(300, 22, 4, bench::StageMode::two_stage, 0.9, "e");
  const auto qs = queries_for(train_tasks);
  SimulatedBackend backend(0.05);
  datagen::DatagenConfig with;
  with.t_steps = 2;
  datagen::DatagenConfig without = with;
  without.gamma = 0.0;
  const auto a = iterative_learn(ToyPolicy(16), backend, qs, with, TrainConfig{}, eval);
  const auto b = iterative_learn(ToyPolicy(16), backend, qs, without, TrainConfig{}, eval);
  REQUIRE_FALSE(a.reports.empty());
  REQUIRE_FALSE(b.reports.empty());
  CHECK(a.reports.back().region_accuracy > b.reports.back().region_accuracy);
}

TEST_CASE("reports json") {
  IterationReport r;
  r.iteration = 2;
  r.n_pairs = 10;
  r.eval_score = 0.5;
  const std::string j = reports_json(std::vector{r}, "no-gamma");
  CHECK(j.find("\"label\": \"no-gamma\"") != std::string::npos);
  CHECK(j.find("\"iteration\": 2") != std::string::npos);
}
