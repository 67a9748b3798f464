// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uvcot/core.hpp"
#include "uvcot/policy.hpp"

namespace uvcot::bench {

// Grid region-reasoning tasks: a G x G grid of glyphs, one key cell, and the
// question "What symbol is at row r, col c?". A policy has to pick the region
// holding the key cell; a fixed answer head then reads the glyph from it.
//
// Two-stage tasks first pick one of four quadrants, then a cell inside it.
// Each stage has its own block of kFeaturesPerStage features, so the policy
// carries a separate linear head per stage.

enum class StageMode { single, two_stage };

const char* to_string(StageMode mode) noexcept;
StageMode stage_mode_from_string(std::string_view s);

inline constexpr std::size_t kFeaturesPerStage = 8;
inline constexpr int kGlyphCount = 26;

// Feature slots within a stage block.
enum FeatureSlot : std::size_t {
  kRowMatch = 0,
  kColMatch = 1,
  kBothMatch = 2,
  kRowCloseness = 3,
  kColCloseness = 4,
  kBias = 5,
  kNoise1 = 6,
  kNoise2 = 7,
};

std::size_t stage_count(StageMode mode) noexcept;
std::size_t feature_dim(StageMode mode) noexcept;

/// "A".."Z".
std::string glyph_text(int glyph);

struct SyntheticTask {
  std::string task_id;
  int grid_size = 4;
  std::vector<std::vector<int>> symbols;  // [row][col]
  int key_row = 0;
  int key_col = 0;
  std::string question;
  int ground_truth = 0;
  StageMode stage_mode = StageMode::single;
  double p_hit = 0.9;
  std::uint64_t seed = 0;

  BoundingBox cell_box(int row, int col) const;
  BoundingBox key_box() const { return cell_box(key_row, key_col); }
  double cell_area() const;

  /// Task payload of the query file:
  /// {"grid_size":G,"symbols":[[...]],"key":[r,c],"stage_mode":str,"p_hit":p,"seed":s}
  std::string payload_json() const;
  Query to_query() const;
  static SyntheticTask from_query(const Query& query);

  friend bool operator==(const SyntheticTask&, const SyntheticTask&) = default;
};

/// Seeded uniform glyph fill and uniform key cell. grid_size >= 2 (even for
/// two-stage), p_hit in (0,1].
SyntheticTask make_task(std::uint64_t seed, int grid_size, StageMode mode, double p_hit,
                        std::string task_id = {});

/// `count` tasks with seeds derived from `base_seed`; ids are prefix + index.
std::vector<SyntheticTask> make_tasks(std::size_t count, std::uint64_t base_seed, int grid_size,
                                      StageMode mode, double p_hit,
                                      std::string_view id_prefix = "q");

struct CandidateSet {
  std::size_t stage = 1;
  std::vector<BoundingBox> regions;
  std::vector<RegionFeatures> features;

  /// Index of the region equal to `box` within `tol`, if any.
  std::optional<std::size_t> find(const BoundingBox& box, double tol = 1e-9) const;
};

/// Stage 1 of single-stage tasks: every cell. Stage 1 of two-stage tasks: the
/// four quadrants. Stage 2 of two-stage tasks: the cells of `parent_region`,
/// which must be one of the quadrants.
CandidateSet candidate_set(const SyntheticTask& task, std::size_t stage,
                           const std::optional<BoundingBox>& parent_region = std::nullopt);

/// Candidate set for the next region step after `context`.
CandidateSet candidate_set_for(const SyntheticTask& task, const ResponseChain& context);

/// True when `region` lets the answer head read the key glyph: it contains
/// the key-cell center and is no larger than a single cell.
bool resolves_key(const SyntheticTask& task, const BoundingBox& region);

/// The non-learnable answer head. A resolving region yields the ground truth
/// with probability p_hit, otherwise a uniformly chosen wrong glyph; any other
/// region yields a wrong glyph with probability p_hit and the ground truth
/// otherwise.
int oracle_answer(const SyntheticTask& task, const BoundingBox& region, std::uint64_t seed);

enum class EvalMode { greedy };

struct PolicyEval {
  double region_accuracy = 0.0;
  double answer_score = 0.0;
  std::size_t n_tasks = 0;
};

/// Greedy roll-out through every stage. region_accuracy counts final regions
/// containing the key cell; answer_score is the mean noise-free evaluator
/// score of the resulting answers.
PolicyEval evaluate_policy(const ToyPolicy& policy, std::span<const SyntheticTask> tasks,
                           EvalMode mode = EvalMode::greedy);

/// Weights `strength` on both_match of every stage block, zero elsewhere.
/// Greedy roll-outs of this policy always land on the key cell.
ToyPolicy oracle_policy(StageMode mode, double strength = 10.0);

}  // namespace uvcot::bench
