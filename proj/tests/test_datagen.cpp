// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <set>

#include "doctest.h"
#include "uvcot/error.hpp"
#include "uvcot/datagen.hpp"
#include "uvcot/jsonl.hpp"
#include "uvcot/synthbench.hpp"

using namespace uvcot;
using namespace uvcot::datagen;

namespace {

ScoredCandidate sc(double score, std::size_t index) {
  const double x = 0.05 * static_cast<double>(index);
  return {ScoredResponse::combine(ChainStep::region(BoundingBox(x, 0.0, x + 0.05, 0.5)), score, 0.0, 0.0),
          index, index};
}

const ResponseChain kChain{"q", {ChainStep::query("What symbol is at row 0, col 0?")}};

// Emits regions from the seed, and answers whose text is the score the
// evaluator will give: 0.6 right after the first region, 0.4 after the second.
class ScriptedBackend final : public Backend {
 public:
  ChainStep generate(const Query&, const GenerationRequest& req, const ToyPolicy&) override {
    if (req.mode == GenerationMode::emit_region) {
      const double x = 0.1 * static_cast<double>(req.seed % 9);
      return ChainStep::region(BoundingBox(x, 0.0, x + 0.1, 0.1));
    }
    return ChainStep::answer(req.context.region_count() == 1 ? "0.6" : "0.4");
  }
  double score(const Query&, const EvaluationRequest& req) override {
    double v = 0.0;
    std::from_chars(req.response.text.data(), req.response.text.data() + req.response.text.size(), v);
    return v;
  }
};

std::vector<Query> sim_queries(std::size_t n, bench::StageMode mode, double p_hit = 0.9,
                               std::uint64_t seed = 77) {
  std::vector<Query> out;
  for (const auto& t : bench::make_tasks(n, seed, 4, mode, p_hit)) out.push_back(t.to_query());
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  DatagenConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_seeds = 4;
  c.k_pairs = 7;  // 4 choose 2 is 6
  CHECK_THROWS_AS(c.validate(), Error);
  c.k_pairs = 6;
  CHECK_NOTHROW(c.validate());
  c.n_seeds = 1;
  c.k_pairs = 1;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("pair construction") {
  DatagenConfig cfg;
  cfg.k_pairs = 1;
  const auto one = construct_pairs(kChain, std::vector{sc(0.9, 0), sc(0.1, 1)}, cfg, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].winner.score == 0.9);
  CHECK(one[0].loser.score == 0.1);

  cfg.k_pairs = 3;
  CHECK(construct_pairs(kChain, std::vector{sc(0.5, 0), sc(0.5, 1), sc(0.5, 2)}, cfg, 1).empty());

  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    cfg.base_seed = seed;
    cfg.n_seeds = 6;
    std::vector<ScoredCandidate> six;
    for (std::size_t i = 0; i < 6; ++i) six.push_back(sc(0.1 + 0.13 * static_cast<double>(i), i));
    const auto pairs = construct_pairs(kChain, six, cfg, 1);
    REQUIRE(pairs.size() == 3);
    std::set<std::pair<double, double>> distinct;
    for (const auto& p : pairs) {
      CHECK(p.winner.score > p.loser.score);
      CHECK(p.context == kChain);
      CHECK_NOTHROW(validate_pair(p));
      distinct.insert({p.winner.score, p.loser.score});
    }
    CHECK(distinct.size() == 3);  // sampled without replacement
    CHECK(construct_pairs(kChain, six, cfg, 1) == pairs);
  }

  // Gaps at or below the margin do not qualify.
  cfg.k_pairs = 3;
  cfg.min_margin = 0.3;
  const auto wide = construct_pairs(kChain, std::vector{sc(0.1, 0), sc(0.3, 1), sc(0.9, 2)}, cfg, 1);
  CHECK(wide.size() == 2);
  for (const auto& p : wide) CHECK(p.winner.score - p.loser.score > 0.3);
}

TEST_CASE("best-chain selection") {
  const auto scored = std::vector{sc(0.2, 0), sc(0.9, 1), sc(0.4, 2)};
  const auto next = select_best(kChain, scored);
  REQUIRE(next.steps.size() == 2);
  CHECK(next.steps[1] == scored[1].response.step);
  CHECK(std::equal(kChain.steps.begin(), kChain.steps.end(), next.steps.begin()));

  const auto tie = std::vector{sc(0.5, 0), sc(0.5, 1)};
  CHECK(select_best(kChain, tie).steps[1] == tie[0].response.step);
}

TEST_CASE("candidate generation on the simulator") {
  const auto qs = sim_queries(1, bench::StageMode::single);
  SimulatedBackend backend(0.05);
  DatagenConfig cfg;
  cfg.n_seeds = 4;
  cfg.k_pairs = 2;
  const ResponseChain chain{qs[0].query_id, {ChainStep::query(qs[0].question)}};
  const auto a = generate_candidates(backend, ToyPolicy(8), qs[0], chain, cfg, 1);
  const auto b = generate_candidates(backend, ToyPolicy(8), qs[0], chain, cfg, 1);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a[i].step.role == StepRole::region);
    CHECK(a[i].step == b[i].step);
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].seed == candidate_seed(cfg, qs[0].query_id, 1, static_cast<int>(i) + 1));
  }
}

TEST_CASE("score combination during evaluation") {
  ScriptedBackend backend;
  const Query q{"q", "Question?", "null"};
  DatagenConfig cfg;
  cfg.n_seeds = 3;
  cfg.k_pairs = 1;
  cfg.t_steps = 2;
  cfg.gamma = 0.5;
  const ResponseChain chain{"q", {ChainStep::query("Question?")}};
  const auto cands = generate_candidates(backend, ToyPolicy(1), q, chain, cfg, 1);
  const auto early = evaluate_responses(backend, ToyPolicy(1), q, chain, cands, cfg, 1);
  REQUIRE(early.size() == 3);
  for (const auto& s : early) {
    CHECK(s.response.score_cur == 0.6);
    CHECK(s.response.score_next == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(s.response.score == doctest::Approx(0.8).epsilon(1e-15));
  }
  const auto last = evaluate_responses(backend, ToyPolicy(1), q, chain, cands, cfg, 2);
  for (const auto& s : last) {
    CHECK(s.response.score_next == 0.0);
    CHECK(s.response.score == s.response.score_cur);
  }
}

TEST_CASE("continuation estimate has no variance when answers are deterministic") {
  const auto qs = sim_queries(20, bench::StageMode::two_stage, 1.0);
  SimulatedBackend backend(0.0);
  const ToyPolicy sharp = bench::oracle_policy(bench::StageMode::two_stage, 60.0);
  DatagenConfig one;
  one.t_steps = 2;
  one.n_next_samples = 1;
  DatagenConfig eight = one;
  eight.n_next_samples = 8;
  for (const auto& q : qs) {
    const ResponseChain chain{q.query_id, {ChainStep::query(q.question)}};
    const auto cands = generate_candidates(backend, ToyPolicy(16), q, chain, one, 1);
    const auto a = evaluate_responses(backend, sharp, q, chain, cands, one, 1);
    const auto b = evaluate_responses(backend, sharp, q, chain, cands, eight, 1);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].response.score_next == b[i].response.score_next);
  }
}

TEST_CASE("per-query generation") {
  SimulatedBackend backend(0.05);
  SUBCASE("single step") {
    DatagenConfig cfg;
    cfg.n_seeds = 4;
    cfg.k_pairs = 2;
    for (const auto& q : sim_queries(20, bench::StageMode::single)) {
      const auto r = generate_for_query(backend, ToyPolicy(8), q, cfg);
      CHECK(r.pairs.size() <= 2);
      for (const auto& p : r.pairs) CHECK(p.timestep == 1);
      CHECK(validate_chain(r.final_chain).empty());
      CHECK(r.final_chain.steps.back().role == StepRole::answer);
    }
  }
  SUBCASE("two stages") {
    DatagenConfig cfg;
    cfg.t_steps = 2;
    bool nonzero_next = false;
    for (const auto& q : sim_queries(30, bench::StageMode::two_stage)) {
      const auto r = generate_for_query(backend, ToyPolicy(16), q, cfg);
      CHECK(r.pairs.size() <= static_cast<std::size_t>(cfg.k_pairs * cfg.t_steps));
      for (const auto& p : r.pairs) {
        if (p.timestep == 1) {
          nonzero_next |= p.winner.score_next > 0.0 || p.loser.score_next > 0.0;
          CHECK(p.winner.score == p.winner.score_cur + cfg.gamma * p.winner.score_next);
        } else {
          CHECK(p.timestep == 2);
          CHECK(p.winner.score_next == 0.0);
          CHECK(p.loser.score_next == 0.0);
          CHECK(p.winner.score == p.winner.score_cur);
          // Stage-2 context carries the selected quadrant.
          CHECK(p.context.region_count() == 1);
        }
      }
    }
    CHECK(nonzero_next);
  }
}

TEST_CASE("dataset generation is reproducible and order-stable") {
  const auto qs = sim_queries(40, bench::StageMode::two_stage);
  DatagenConfig cfg;
  cfg.t_steps = 2;
  cfg.base_seed = 3;
  SimulatedBackend backend(0.05);
  const auto a = generate_dataset(backend, ToyPolicy(16), qs, cfg);
  cfg.workers = 3;
  const auto b = generate_dataset(backend, ToyPolicy(16), qs, cfg);
  REQUIRE(a.pairs.size() == b.pairs.size());
  std::string sa, sb;
  for (const auto& p : a.pairs) sa += serialize_pair(p) + "\n";
  for (const auto& p : b.pairs) sb += serialize_pair(p) + "\n";
  CHECK(sa == sb);
  CHECK(a.diagnostics_json() == b.diagnostics_json());
  for (std::size_t i = 1; i < a.pairs.size(); ++i) {
    const auto& x = a.pairs[i - 1];
    const auto& y = a.pairs[i];
    CHECK(std::tie(x.query_id, x.timestep) <= std::tie(y.query_id, y.timestep));
  }
  for (const auto& p : a.pairs) CHECK_NOTHROW(validate_pair(p));
}
