// SPDX-License-Identifier: Apache-2.0
#include "uvcot/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace uvcot {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::missing_field: return "missing field";
    case ErrorKind::invariant: return "invariant violation";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::config: return "config error";
    case ErrorKind::empty_result: return "empty result";
    case ErrorKind::no_match: return "no bbox found";
    case ErrorKind::malformed_number: return "malformed number";
    case ErrorKind::pixel_coordinates: return "pixel coordinates";
    case ErrorKind::transport: return "transport failure";
    case ErrorKind::http_status: return "HTTP status";
    case ErrorKind::generation_failure: return "generation failure";
    case ErrorKind::score_parse: return "score parse error";
    case ErrorKind::skipped_query: return "query skipped";
    case ErrorKind::unresolvable_region: return "unresolvable region";
    case ErrorKind::partial_iteration: return "partial iteration";
  }
  return "error";
}

// ---------------------------------------------------------------------------
// BoundingBox

std::string BoundingBox::check(double x1, double y1, double x2, double y2) {
  for (double v : {x1, y1, x2, y2}) {
    if (!std::isfinite(v)) return "non-finite coordinate";
  }
  if (x1 < 0.0 || x1 > 1.0) return "x1 outside [0,1]";
  if (y1 < 0.0 || y1 > 1.0) return "y1 outside [0,1]";
  if (x2 < 0.0 || x2 > 1.0) return "x2 outside [0,1]";
  if (y2 < 0.0 || y2 > 1.0) return "y2 outside [0,1]";
  if (!(x1 < x2)) return "x1 >= x2";
  if (!(y1 < y2)) return "y1 >= y2";
  return {};
}

BoundingBox::BoundingBox(double x1, double y1, double x2, double y2)
    : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (auto why = check(x1, y1, x2, y2); !why.empty()) {
    throw Error(ErrorKind::invariant, "bounding box " + why, "bbox");
  }
}

double BoundingBox::intersection_area(const BoundingBox& o) const noexcept {
  const double w = std::min(x2_, o.x2_) - std::max(x1_, o.x1_);
  const double h = std::min(y2_, o.y2_) - std::max(y1_, o.y1_);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

bool BoundingBox::approx_equal(const BoundingBox& o, double tol) const noexcept {
  return std::abs(x1_ - o.x1_) <= tol && std::abs(y1_ - o.y1_) <= tol &&
         std::abs(x2_ - o.x2_) <= tol && std::abs(y2_ - o.y2_) <= tol;
}

namespace {
void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}
}  // namespace

std::string BoundingBox::to_string() const {
  std::string out = "[";
  append_double(out, x1_);
  out += ',';
  append_double(out, y1_);
  out += ',';
  append_double(out, x2_);
  out += ',';
  append_double(out, y2_);
  out += ']';
  return out;
}

// ---------------------------------------------------------------------------
// Steps and chains

const char* to_string(StepRole role) noexcept {
  switch (role) {
    case StepRole::query: return "query";
    case StepRole::region: return "region";
    case StepRole::answer: return "answer";
  }
  return "?";
}

StepRole step_role_from_string(std::string_view s) {
  if (s == "query") return StepRole::query;
  if (s == "region") return StepRole::region;
  if (s == "answer") return StepRole::answer;
  throw Error(ErrorKind::invariant, "unknown role '" + std::string(s) + "'",
              "role");
}

ChainStep ChainStep::query(std::string text) {
  return ChainStep{StepRole::query, std::move(text), std::nullopt};
}

ChainStep ChainStep::region(const BoundingBox& box, std::string text) {
  if (text.empty()) text = box.to_string();
  return ChainStep{StepRole::region, std::move(text), box};
}

ChainStep ChainStep::answer(std::string text) {
  return ChainStep{StepRole::answer, std::move(text), std::nullopt};
}

ResponseChain ResponseChain::appended(ChainStep step) const {
  ResponseChain out = *this;
  out.steps.push_back(std::move(step));
  return out;
}

std::size_t ResponseChain::region_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(),
                    [](const ChainStep& s) { return s.role == StepRole::region; }));
}

const ChainStep* ResponseChain::last_region() const noexcept {
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (it->role == StepRole::region) return &*it;
  }
  return nullptr;
}

const std::string& ResponseChain::question() const {
  if (steps.empty() || steps.front().role != StepRole::query) {
    throw Error(ErrorKind::invariant, "chain has no leading query", "steps[0]");
  }
  return steps.front().text;
}

std::vector<std::string> validate_chain(const ResponseChain& chain) {
  std::vector<std::string> out;
  if (chain.steps.empty()) {
    out.emplace_back("chain is empty");
    return out;
  }
  if (chain.steps.front().role != StepRole::query) out.emplace_back("query not first");
  for (std::size_t i = 0; i < chain.steps.size(); ++i) {
    const ChainStep& s = chain.steps[i];
    const std::string at = "steps[" + std::to_string(i) + "]: ";
    if (s.role == StepRole::query && i != 0) out.push_back(at + "query not at position 0");
    if (s.role == StepRole::region) {
      if (!s.bbox) {
        out.push_back(at + "region step without bbox");
      } else if (auto why = BoundingBox::check(s.bbox->x1(), s.bbox->y1(), s.bbox->x2(),
                                               s.bbox->y2());
                 !why.empty()) {
        out.push_back(at + "invalid bbox: " + why);
      }
    } else if (s.bbox) {
      out.push_back(at + "bbox on non-region step");
    }
    if (s.role == StepRole::answer &&
        (i == 0 || chain.steps[i - 1].role != StepRole::region)) {
      out.push_back(at + "answer does not follow a region");
    }
  }
  return out;
}

ScoredResponse ScoredResponse::combine(ChainStep step, double score_cur,
                                       double score_next, double gamma) {
  const double weighted = gamma * score_next;
  return ScoredResponse{std::move(step), score_cur, score_next, score_cur + weighted};
}

// ---------------------------------------------------------------------------
// Pair validation

namespace {

void check_scored(const ScoredResponse& r, double gamma, const std::string& who) {
  const auto fail = [&](const std::string& field, const std::string& msg) {
    throw Error(ErrorKind::invariant, msg, who + "." + field);
  };
  if (r.step.role == StepRole::query) fail("text", "response cannot be a query step");
  if (r.step.role == StepRole::region && !r.step.bbox) fail("bbox", "region response needs a bbox");
  if (r.step.role != StepRole::region && r.step.bbox) fail("bbox", "bbox on non-region response");
  if (!std::isfinite(r.score_cur) || r.score_cur < 0.0 || r.score_cur > 1.0)
    fail("score_cur", "score_cur must lie in [0,1]");
  if (!std::isfinite(r.score_next) || r.score_next < 0.0 || r.score_next > 1.0)
    fail("score_next", "score_next must lie in [0,1]");
  if (!std::isfinite(r.score) || r.score < 0.0) fail("score", "score must be >= 0");
  if (ScoredResponse::combine(r.step, r.score_cur, r.score_next, gamma).score != r.score)
    fail("score", "score != score_cur + gamma * score_next");
}

}  // namespace

void validate_pair(const PreferencePair& pair) {
  if (pair.query_id.empty()) throw Error(ErrorKind::invariant, "empty query_id", "query_id");
  if (pair.timestep < 1) throw Error(ErrorKind::invariant, "timestep must be >= 1", "timestep");
  if (pair.context.query_id != pair.query_id)
    throw Error(ErrorKind::invariant, "context belongs to another query", "context");
  if (auto v = validate_chain(pair.context); !v.empty())
    throw Error(ErrorKind::invariant, v.front(), "context");
  if (!std::isfinite(pair.meta.gamma) || pair.meta.gamma < 0.0)
    throw Error(ErrorKind::invariant, "gamma must be >= 0", "meta.gamma");
  if (pair.meta.n_candidates < 2)
    throw Error(ErrorKind::invariant, "n_candidates must be >= 2", "meta.n_candidates");
  check_scored(pair.winner, pair.meta.gamma, "winner");
  check_scored(pair.loser, pair.meta.gamma, "loser");
  if (!(pair.winner.score > pair.loser.score))
    throw Error(ErrorKind::invariant, "winner.score must exceed loser.score", "winner.score");
  if (pair.winner.step == pair.loser.step)
    throw Error(ErrorKind::invariant, "winner and loser are the same response", "winner");
}

}  // namespace uvcot
