// SPDX-License-Identifier: Apache-2.0
#include "uvcot/synthbench.hpp"

#include <cmath>
#include <cstdlib>

#include "json.hpp"
#include "uvcot/rng.hpp"

namespace uvcot::bench {

namespace {

constexpr std::uint64_t kTagGlyphs = 0x676c797068ULL;  // "glyph"
constexpr std::uint64_t kTagNoise = 0x6e6f697365ULL;   // "noise"
constexpr std::uint64_t kTagAnswer = 0x616e73ULL;      // "ans"
constexpr std::uint64_t kTagEval = 0x6576616cULL;      // "eval"
constexpr std::uint64_t kTagTask = 0x7461736bULL;      // "task"

void check_shape(int grid_size, StageMode mode, double p_hit) {
  if (grid_size < 2) {
    throw Error(ErrorKind::invalid_argument,
                "grid_size must be >= 2, got " + std::to_string(grid_size), "grid_size");
  }
  if (mode == StageMode::two_stage && grid_size % 2 != 0) {
    throw Error(ErrorKind::invalid_argument, "two_stage tasks need an even grid_size",
                "grid_size");
  }
  if (!(p_hit > 0.0 && p_hit <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "p_hit must lie in (0,1]", "p_hit");
  }
}

double closeness(double a, double b, int grid) { return 1.0 - std::abs(a - b) / grid; }

void fill_noise(RegionFeatures& f, std::size_t offset, std::uint64_t seed) {
  Rng rng(seed);
  f.values[offset + kNoise1] = rng.uniform(-1.0, 1.0);
  f.values[offset + kNoise2] = rng.uniform(-1.0, 1.0);
}

}  // namespace

const char* to_string(StageMode mode) noexcept {
  return mode == StageMode::single ? "single" : "two_stage";
}

StageMode stage_mode_from_string(std::string_view s) {
  if (s == "single") return StageMode::single;
  if (s == "two_stage") return StageMode::two_stage;
  throw Error(ErrorKind::invalid_argument, "unknown stage_mode '" + std::string(s) + "'",
              "stage_mode");
}

std::size_t stage_count(StageMode mode) noexcept { return mode == StageMode::single ? 1 : 2; }

std::size_t feature_dim(StageMode mode) noexcept { return kFeaturesPerStage * stage_count(mode); }

std::string glyph_text(int glyph) {
  if (glyph < 0 || glyph >= kGlyphCount) {
    throw Error(ErrorKind::invalid_argument, "glyph id out of range", "glyph");
  }
  return std::string(1, static_cast<char>('A' + glyph));
}

// ---------------------------------------------------------------------------
// SyntheticTask

BoundingBox SyntheticTask::cell_box(int row, int col) const {
  const double g = grid_size;
  return BoundingBox(col / g, row / g, (col + 1) / g, (row + 1) / g);
}

double SyntheticTask::cell_area() const {
  return 1.0 / (static_cast<double>(grid_size) * grid_size);
}

std::string SyntheticTask::payload_json() const {
  nlohmann::ordered_json j;
  j["grid_size"] = grid_size;
  j["symbols"] = symbols;
  j["key"] = {key_row, key_col};
  j["stage_mode"] = to_string(stage_mode);
  j["p_hit"] = p_hit;
  j["seed"] = seed;
  return j.dump();
}

Query SyntheticTask::to_query() const { return Query{task_id, question, payload_json()}; }

SyntheticTask SyntheticTask::from_query(const Query& query) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(query.task_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse, e.what(), "task");
  }
  const auto field = [&](const char* key) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(key))
      throw Error(ErrorKind::missing_field, "synthetic task payload incomplete",
                  std::string("task.") + key);
    return j[key];
  };
  SyntheticTask t;
  try {
    t.task_id = query.query_id;
    t.question = query.question;
    t.grid_size = field("grid_size").get<int>();
    t.symbols = field("symbols").get<std::vector<std::vector<int>>>();
    const auto key = field("key").get<std::vector<int>>();
    if (key.size() != 2) throw Error(ErrorKind::invariant, "key must be [row,col]", "task.key");
    t.key_row = key[0];
    t.key_col = key[1];
    t.stage_mode = stage_mode_from_string(field("stage_mode").get<std::string>());
    t.p_hit = field("p_hit").get<double>();
    t.seed = field("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, e.what(), "task");
  }
  check_shape(t.grid_size, t.stage_mode, t.p_hit);
  const auto g = static_cast<std::size_t>(t.grid_size);
  if (t.symbols.size() != g)
    throw Error(ErrorKind::invariant, "symbols must have grid_size rows", "task.symbols");
  for (const auto& row : t.symbols) {
    if (row.size() != g)
      throw Error(ErrorKind::invariant, "symbols must have grid_size columns", "task.symbols");
    for (int s : row) {
      if (s < 0 || s >= kGlyphCount)
        throw Error(ErrorKind::invariant, "glyph id out of range", "task.symbols");
    }
  }
  if (t.key_row < 0 || t.key_row >= t.grid_size || t.key_col < 0 || t.key_col >= t.grid_size)
    throw Error(ErrorKind::invariant, "key cell out of range", "task.key");
  t.ground_truth = t.symbols[t.key_row][t.key_col];
  return t;
}

SyntheticTask make_task(std::uint64_t seed, int grid_size, StageMode mode, double p_hit,
                        std::string task_id) {
  check_shape(grid_size, mode, p_hit);
  Rng rng(hash_combine(seed, kTagGlyphs));
  SyntheticTask t;
  t.task_id = task_id.empty() ? "task-" + std::to_string(seed) : std::move(task_id);
  t.grid_size = grid_size;
  t.symbols.assign(grid_size, std::vector<int>(grid_size, 0));
  for (auto& row : t.symbols) {
    for (int& s : row) s = static_cast<int>(rng.below(kGlyphCount));
  }
  t.key_row = static_cast<int>(rng.below(grid_size));
  t.key_col = static_cast<int>(rng.below(grid_size));
  t.ground_truth = t.symbols[t.key_row][t.key_col];
  t.question = "What symbol is at row " + std::to_string(t.key_row) + ", col " +
               std::to_string(t.key_col) + "?";
  t.stage_mode = mode;
  t.p_hit = p_hit;
  t.seed = seed;
  return t;
}

std::vector<SyntheticTask> make_tasks(std::size_t count, std::uint64_t base_seed, int grid_size,
                                      StageMode mode, double p_hit, std::string_view id_prefix) {
  std::vector<SyntheticTask> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(make_task(hash_combine(base_seed, kTagTask, i), grid_size, mode, p_hit,
                            std::string(id_prefix) + std::to_string(i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Candidate regions

std::optional<std::size_t> CandidateSet::find(const BoundingBox& box, double tol) const {
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (regions[i].approx_equal(box, tol)) return i;
  }
  return std::nullopt;
}

namespace {

void add_cell(CandidateSet& set, const SyntheticTask& task, int r, int c, std::size_t offset,
              std::size_t dim) {
  RegionFeatures f{std::vector<double>(dim, 0.0)};
  const bool row = r == task.key_row;
  const bool col = c == task.key_col;
  f.values[offset + kRowMatch] = row ? 1.0 : 0.0;
  f.values[offset + kColMatch] = col ? 1.0 : 0.0;
  f.values[offset + kBothMatch] = (row && col) ? 1.0 : 0.0;
  f.values[offset + kRowCloseness] = closeness(r, task.key_row, task.grid_size);
  f.values[offset + kColCloseness] = closeness(c, task.key_col, task.grid_size);
  f.values[offset + kBias] = 1.0;
  fill_noise(f, offset,
             hash_combine(task.seed, kTagNoise, set.stage,
                          static_cast<std::uint64_t>(r * task.grid_size + c)));
  set.regions.push_back(task.cell_box(r, c));
  set.features.push_back(std::move(f));
}

}  // namespace

CandidateSet candidate_set(const SyntheticTask& task, std::size_t stage,
                           const std::optional<BoundingBox>& parent_region) {
  const std::size_t stages = stage_count(task.stage_mode);
  if (stage < 1 || stage > stages) {
    throw Error(ErrorKind::invalid_argument,
                "stage " + std::to_string(stage) + " does not exist for " +
                    to_string(task.stage_mode) + " tasks",
                "stage");
  }
  const std::size_t dim = feature_dim(task.stage_mode);
  const std::size_t offset = (stage - 1) * kFeaturesPerStage;
  const int g = task.grid_size;
  CandidateSet set;
  set.stage = stage;

  if (task.stage_mode == StageMode::single) {
    for (int r = 0; r < g; ++r)
      for (int c = 0; c < g; ++c) add_cell(set, task, r, c, offset, dim);
    return set;
  }

  const int half = g / 2;
  if (stage == 1) {
    for (int qr = 0; qr < 2; ++qr) {
      for (int qc = 0; qc < 2; ++qc) {
        RegionFeatures f{std::vector<double>(dim, 0.0)};
        const bool row = task.key_row >= qr * half && task.key_row < (qr + 1) * half;
        const bool col = task.key_col >= qc * half && task.key_col < (qc + 1) * half;
        const double center_row = qr * half + (half - 1) / 2.0;
        const double center_col = qc * half + (half - 1) / 2.0;
        f.values[offset + kRowMatch] = row ? 1.0 : 0.0;
        f.values[offset + kColMatch] = col ? 1.0 : 0.0;
        f.values[offset + kBothMatch] = (row && col) ? 1.0 : 0.0;
        f.values[offset + kRowCloseness] = closeness(center_row, task.key_row, g);
        f.values[offset + kColCloseness] = closeness(center_col, task.key_col, g);
        f.values[offset + kBias] = 1.0;
        fill_noise(f, offset,
                   hash_combine(task.seed, kTagNoise, set.stage,
                                static_cast<std::uint64_t>(qr * 2 + qc)));
        set.regions.emplace_back(qc * 0.5, qr * 0.5, (qc + 1) * 0.5, (qr + 1) * 0.5);
        set.features.push_back(std::move(f));
      }
    }
    return set;
  }

  if (!parent_region) {
    throw Error(ErrorKind::invalid_argument, "stage 2 needs a parent quadrant", "parent_region");
  }
  const CandidateSet quadrants = candidate_set(task, 1);
  const auto q = quadrants.find(*parent_region);
  if (!q) {
    throw Error(ErrorKind::invalid_argument,
                "parent region " + parent_region->to_string() + " is not a quadrant",
                "parent_region");
  }
  const int qr = static_cast<int>(*q) / 2;
  const int qc = static_cast<int>(*q) % 2;
  for (int r = qr * half; r < (qr + 1) * half; ++r)
    for (int c = qc * half; c < (qc + 1) * half; ++c) add_cell(set, task, r, c, offset, dim);
  return set;
}

CandidateSet candidate_set_for(const SyntheticTask& task, const ResponseChain& context) {
  const std::size_t stage = context.region_count() + 1;
  std::optional<BoundingBox> parent;
  if (const ChainStep* last = context.last_region()) parent = last->bbox;
  return candidate_set(task, stage, parent);
}

// ---------------------------------------------------------------------------
// Answer head and evaluation

bool resolves_key(const SyntheticTask& task, const BoundingBox& region) {
  const BoundingBox key = task.key_box();
  return region.contains(key.center_x(), key.center_y()) &&
         region.area() <= task.cell_area() * (1.0 + 1e-9);
}

int oracle_answer(const SyntheticTask& task, const BoundingBox& region, std::uint64_t seed) {
  Rng rng(hash_combine(seed, kTagAnswer));
  const bool hit = rng.uniform_open() < task.p_hit;
  const bool correct = resolves_key(task, region) ? hit : !hit;
  if (correct) return task.ground_truth;
  // Uniform over the kGlyphCount - 1 wrong glyphs.
  const int shift = 1 + static_cast<int>(rng.below(kGlyphCount - 1));
  return (task.ground_truth + shift) % kGlyphCount;
}

PolicyEval evaluate_policy(const ToyPolicy& policy, std::span<const SyntheticTask> tasks,
                           EvalMode) {
  if (tasks.empty()) throw Error(ErrorKind::invalid_argument, "no evaluation tasks");
  std::size_t region_hits = 0;
  double answer_total = 0.0;
  for (const auto& task : tasks) {
    std::optional<BoundingBox> region;
    for (std::size_t stage = 1; stage <= stage_count(task.stage_mode); ++stage) {
      const CandidateSet set = candidate_set(task, stage, region);
      region = set.regions[policy.greedy_region(set.features)];
    }
    const BoundingBox key = task.key_box();
    if (region->contains(key)) ++region_hits;
    if (oracle_answer(task, *region, hash_combine(task.seed, kTagEval)) == task.ground_truth)
      answer_total += 1.0;
  }
  const double n = static_cast<double>(tasks.size());
  return PolicyEval{static_cast<double>(region_hits) / n, answer_total / n, tasks.size()};
}

ToyPolicy oracle_policy(StageMode mode, double strength) {
  ToyPolicy p(feature_dim(mode));
  for (std::size_t s = 0; s < stage_count(mode); ++s) {
    p.mutable_weights()[s * kFeaturesPerStage + kBothMatch] = strength;
  }
  return p;
}

}  // namespace uvcot::bench
