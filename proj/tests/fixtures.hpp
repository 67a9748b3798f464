// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "uvcot/core.hpp"
#include "uvcot/rng.hpp"

namespace fixtures {

inline uvcot::ScoredResponse scored(uvcot::ChainStep step, double cur, double next, double gamma) {
  return uvcot::ScoredResponse::combine(std::move(step), cur, next, gamma);
}

// A valid pair with the given final scores (score_next = 0).
inline uvcot::PreferencePair simple_pair(double s_w, double s_l) {
  uvcot::PreferencePair p;
  p.query_id = "q1";
  p.timestep = 1;
  p.context.query_id = "q1";
  p.context.steps.push_back(uvcot::ChainStep::query("What symbol is at row 1, col 2?"));
  p.winner = scored(uvcot::ChainStep::region(uvcot::BoundingBox(0.5, 0.25, 0.75, 0.5)), s_w, 0.0, 0.0);
  p.loser = scored(uvcot::ChainStep::region(uvcot::BoundingBox(0.0, 0.0, 0.25, 0.25)), s_l, 0.0, 0.0);
  p.meta = {0.0, 8};
  return p;
}

inline uvcot::BoundingBox random_box(uvcot::Rng& rng) {
  const double x1 = rng.uniform(0.0, 0.9), y1 = rng.uniform(0.0, 0.9);
  return uvcot::BoundingBox(x1, y1, x1 + rng.uniform(0.01, 1.0 - x1),
                            y1 + rng.uniform(0.01, 1.0 - y1));
}

// Seeded random valid pair: random boxes, awkward doubles, optional history.
inline uvcot::PreferencePair random_pair(uvcot::Rng& rng, int i) {
  using namespace uvcot;
  PreferencePair p;
  p.query_id = "q" + std::to_string(i);
  p.context.query_id = p.query_id;
  p.context.steps.push_back(ChainStep::query("Question \"" + std::to_string(i) + "\"\twith\\escapes"));
  const bool deep = rng.below(2) == 1;
  if (deep) {
    const BoundingBox b = random_box(rng);
    p.context.steps.push_back(ChainStep::region(b));
    p.context.steps.push_back(ChainStep::answer("ans " + std::to_string(rng.below(100))));
  }
  p.timestep = deep ? 2 : 1;
  const double gamma = rng.uniform(0.0, 1.0);
  p.meta = {gamma, static_cast<std::int64_t>(2 + rng.below(10))};
  for (;;) {
    p.winner = scored(ChainStep::region(random_box(rng)), rng.uniform(0.0, 1.0),
                      rng.uniform(0.0, 1.0), gamma);
    p.loser = scored(rng.below(2) ? ChainStep::answer("glyph " + std::to_string(rng.below(26)))
                                  : ChainStep::region(random_box(rng)),
                     rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), gamma);
    if (p.winner.score < p.loser.score) std::swap(p.winner, p.loser);
    if (p.winner.score > p.loser.score) break;
  }
  return p;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("uvcot_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
