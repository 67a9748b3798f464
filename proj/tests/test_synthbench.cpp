// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "uvcot/error.hpp"
#include "uvcot/synthbench.hpp"

using namespace uvcot;
using namespace uvcot::bench;

namespace {
void check_tiling(const CandidateSet& set, double expected_area) {
  double total = 0.0;
  for (std::size_t i = 0; i < set.regions.size(); ++i) {
    total += set.regions[i].area();
    for (std::size_t j = i + 1; j < set.regions.size(); ++j)
      CHECK(set.regions[i].intersection_area(set.regions[j]) == 0.0);
  }
  CHECK(total == doctest::Approx(expected_area).epsilon(1e-12));
  CHECK(set.features.size() == set.regions.size());
}

int both_match_count(const CandidateSet& set) {
  int n = 0;
  for (const auto& f : set.features) n += f.values[(set.stage - 1) * kFeaturesPerStage + kBothMatch] == 1.0;
  return n;
}
}  // namespace

TEST_CASE("task generation") {
  CHECK(make_task(5, 4, StageMode::single, 0.9) == make_task(5, 4, StageMode::single, 0.9));
  CHECK_FALSE(make_task(5, 4, StageMode::single, 0.9) == make_task(6, 4, StageMode::single, 0.9));
  CHECK_THROWS_AS(make_task(5, 1, StageMode::single, 0.9), Error);
  CHECK_THROWS_AS(make_task(5, 3, StageMode::two_stage, 0.9), Error);
  CHECK_THROWS_AS(make_task(5, 4, StageMode::single, 0.0), Error);

  const auto t = make_task(17, 4, StageMode::single, 0.9);
  CHECK(t.ground_truth == t.symbols[t.key_row][t.key_col]);
  CHECK(t.question == "What symbol is at row " + std::to_string(t.key_row) + ", col " +
                          std::to_string(t.key_col) + "?");
}

TEST_CASE("key cell is uniform over the grid") {
  const auto tasks = make_tasks(10000, 123, 4, StageMode::single, 0.9);
  std::array<int, 16> counts{};
  for (const auto& t : tasks) ++counts[t.key_row * 4 + t.key_col];
  const double p = 1.0 / 16, se = std::sqrt(p * (1 - p) / 10000);
  for (int c : counts) CHECK(std::abs(c / 10000.0 - p) < 3 * se);
}

TEST_CASE("query payload round trip") {
  const auto t = make_task(9, 6, StageMode::two_stage, 0.75, "abc");
  const Query q = t.to_query();
  CHECK(q.query_id == "abc");
  CHECK(q.question == t.question);
  CHECK(SyntheticTask::from_query(q) == t);
  CHECK_THROWS_AS(SyntheticTask::from_query(Query{"x", "?", "{\"grid_size\":4}"}), Error);
  CHECK_THROWS_AS(SyntheticTask::from_query(Query{"x", "?", "\"free text\""}), Error);
}

TEST_CASE("single-stage candidates") {
  const auto t = make_task(3, 4, StageMode::single, 0.9);
  const auto set = candidate_set(t, 1);
  REQUIRE(set.regions.size() == 16);
  check_tiling(set, 1.0);
  CHECK(both_match_count(set) == 1);
  const auto key = *set.find(t.key_box());
  CHECK(set.features[key].values[kBothMatch] == 1.0);
  for (const auto& f : set.features) {
    REQUIRE(f.values.size() == 8);
    CHECK(f.values[kBias] == 1.0);
    CHECK(std::abs(f.values[kNoise1]) <= 1.0);
    CHECK(std::abs(f.values[kNoise2]) <= 1.0);
  }
  CHECK_THROWS_AS(candidate_set(t, 2), Error);
}

TEST_CASE("two-stage candidates") {
  const auto t = make_task(4, 4, StageMode::two_stage, 0.9);
  const auto quads = candidate_set(t, 1);
  REQUIRE(quads.regions.size() == 4);
  check_tiling(quads, 1.0);
  CHECK(both_match_count(quads) == 1);
  std::size_t key_quad = 0;
  for (std::size_t i = 0; i < 4; ++i)
    if (quads.features[i].values[kBothMatch] == 1.0) key_quad = i;
  CHECK(quads.regions[key_quad].contains(t.key_box()));
  // Stage-1 features live in the first block only.
  for (const auto& f : quads.features) {
    REQUIRE(f.values.size() == 16);
    for (std::size_t k = kFeaturesPerStage; k < 16; ++k) CHECK(f.values[k] == 0.0);
  }

  for (std::size_t q = 0; q < 4; ++q) {
    const auto cells = candidate_set(t, 2, quads.regions[q]);
    REQUIRE(cells.regions.size() == 4);
    check_tiling(cells, 0.25);
    CHECK(both_match_count(cells) == (q == key_quad ? 1 : 0));
    for (const auto& r : cells.regions) CHECK(quads.regions[q].contains(r));
  }
  CHECK_THROWS_AS(candidate_set(t, 2), Error);
  CHECK_THROWS_AS(candidate_set(t, 2, BoundingBox(0.1, 0.1, 0.4, 0.4)), Error);
}

TEST_CASE("answer oracle") {
  const auto sure = make_task(8, 4, StageMode::single, 1.0);
  const auto cells = candidate_set(sure, 1);
  for (std::uint64_t s = 0; s < 200; ++s) {
    CHECK(oracle_answer(sure, sure.key_box(), s) == sure.ground_truth);
    for (const auto& r : cells.regions) {
      if (r == sure.key_box()) continue;
      CHECK(oracle_answer(sure, r, s) != sure.ground_truth);
    }
    // A region larger than one cell does not resolve the key glyph.
    CHECK(oracle_answer(sure, BoundingBox(0, 0, 1, 1), s) != sure.ground_truth);
  }

  const auto noisy = make_task(8, 4, StageMode::single, 0.9);
  const int n = 100000;
  int right = 0;
  for (int s = 0; s < n; ++s) right += oracle_answer(noisy, noisy.key_box(), s) == noisy.ground_truth;
  CHECK(std::abs(right / double(n) - 0.9) < 3 * std::sqrt(0.09 / n));
}

TEST_CASE("policy evaluation") {
  const auto single = make_tasks(500, 1, 4, StageMode::single, 0.9);
  CHECK(evaluate_policy(oracle_policy(StageMode::single), single).region_accuracy == 1.0);
  const auto two = make_tasks(500, 1, 4, StageMode::two_stage, 0.9);
  CHECK(evaluate_policy(oracle_policy(StageMode::two_stage), two).region_accuracy == 1.0);

  const auto big = make_tasks(10000, 2, 4, StageMode::single, 0.9);
  const auto chance = evaluate_policy(ToyPolicy(feature_dim(StageMode::single)), big);
  CHECK(std::abs(chance.region_accuracy - 1.0 / 16) < 3 * std::sqrt((1.0 / 16) * (15.0 / 16) / 10000));

  const auto exact = make_tasks(300, 3, 4, StageMode::single, 1.0);
  for (const ToyPolicy& p : {ToyPolicy(8), oracle_policy(StageMode::single)}) {
    const auto ev = evaluate_policy(p, exact);
    CHECK(ev.answer_score == ev.region_accuracy);
  }
  CHECK_THROWS_AS(evaluate_policy(ToyPolicy(8), std::vector<SyntheticTask>{}), Error);
}
