// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uvcot/error.hpp"

namespace uvcot {

/// Rectangular region in normalized image coordinates (fractions of width and
/// height). Invariant: 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1.
class BoundingBox {
 public:
  /// Throws Error{invariant} naming the first offending coordinate.
  BoundingBox(double x1, double y1, double x2, double y2);

  /// Empty string when valid, otherwise a description of the violation.
  static std::string check(double x1, double y1, double x2, double y2);

  double x1() const noexcept { return x1_; }
  double y1() const noexcept { return y1_; }
  double x2() const noexcept { return x2_; }
  double y2() const noexcept { return y2_; }

  double area() const noexcept { return (x2_ - x1_) * (y2_ - y1_); }
  double center_x() const noexcept { return 0.5 * (x1_ + x2_); }
  double center_y() const noexcept { return 0.5 * (y1_ + y2_); }

  /// Closed containment test.
  bool contains(double x, double y) const noexcept {
    return x >= x1_ && x <= x2_ && y >= y1_ && y <= y2_;
  }
  bool contains(const BoundingBox& other) const noexcept {
    return other.x1_ >= x1_ && other.x2_ <= x2_ && other.y1_ >= y1_ &&
           other.y2_ <= y2_;
  }
  double intersection_area(const BoundingBox& other) const noexcept;
  bool approx_equal(const BoundingBox& other, double tol) const noexcept;

  /// "[x1,y1,x2,y2]" with shortest round-trip decimals; accepted by parse_bbox.
  std::string to_string() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double x1_, y1_, x2_, y2_;
};

enum class StepRole { query, region, answer };

const char* to_string(StepRole role) noexcept;
StepRole step_role_from_string(std::string_view s);

struct ChainStep {
  StepRole role = StepRole::query;
  std::string text;
  std::optional<BoundingBox> bbox;  // present iff role == region

  static ChainStep query(std::string text);
  static ChainStep region(const BoundingBox& box, std::string text = {});
  static ChainStep answer(std::string text);

  friend bool operator==(const ChainStep&, const ChainStep&) = default;
};

/// y_0..y_t of one reasoning episode. steps[0] is always the query.
struct ResponseChain {
  std::string query_id;
  std::vector<ChainStep> steps;

  ResponseChain appended(ChainStep step) const;
  std::size_t region_count() const noexcept;
  /// Most recent region step, if any.
  const ChainStep* last_region() const noexcept;
  const std::string& question() const;

  friend bool operator==(const ResponseChain&, const ResponseChain&) = default;
};

/// Returns one human-readable entry per violated chain invariant; empty means
/// valid. Region steps may follow region steps (coarse-to-fine refinement),
/// but every answer must directly follow a region.
std::vector<std::string> validate_chain(const ResponseChain& chain);

struct ScoredResponse {
  ChainStep step;
  double score_cur = 0.0;
  double score_next = 0.0;
  double score = 0.0;

  /// score = score_cur + gamma * score_next, evaluated in one fixed order so
  /// the stored value can be re-derived bitwise.
  static ScoredResponse combine(ChainStep step, double score_cur,
                                double score_next, double gamma);

  friend bool operator==(const ScoredResponse&, const ScoredResponse&) = default;
};

struct PairMeta {
  double gamma = 0.0;
  std::int64_t n_candidates = 0;

  friend bool operator==(const PairMeta&, const PairMeta&) = default;
};

struct PreferencePair {
  std::string query_id;
  std::int64_t timestep = 1;
  ResponseChain context;  // shared prefix y_{0:t-1}
  ScoredResponse winner;
  ScoredResponse loser;
  PairMeta meta;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

/// Throws Error{invariant} with the field path of the first violation.
void validate_pair(const PreferencePair& pair);

/// One line of the query file. `task` is kept as raw JSON text: a synthetic
/// task payload for the simulator or free-form prompt data for HTTP.
struct Query {
  std::string query_id;
  std::string question;
  std::string task_json;

  friend bool operator==(const Query&, const Query&) = default;
};

}  // namespace uvcot
