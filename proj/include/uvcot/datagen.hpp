// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uvcot/backends.hpp"
#include "uvcot/core.hpp"
#include "uvcot/policy.hpp"

namespace uvcot::datagen {

struct DatagenConfig {
  int n_seeds = 8;          // n: candidates per timestep
  int k_pairs = 4;          // k: pairs kept per timestep
  int n_next_samples = 3;   // continuations averaged into score_next
  double gamma = 0.5;
  int t_steps = 1;          // T
  double min_margin = 0.0;
  std::uint64_t base_seed = 0;
  double temperature = 1.0;
  int workers = 1;          // queries processed concurrently

  /// Throws Error{config}; includes k_pairs <= n_seeds * (n_seeds - 1) / 2.
  void validate() const;
};

struct Candidate {
  ChainStep step;
  std::uint64_t seed = 0;
  std::size_t index = 0;  // 0-based position among the n seeds
};

struct ScoredCandidate {
  ScoredResponse response;
  std::uint64_t seed = 0;
  std::size_t index = 0;
};

struct StepDiagnostics {
  int timestep = 0;
  int generated = 0;
  int dropped_generation = 0;
  int dropped_evaluation = 0;
  int pairs = 0;
  double score_min = 0.0;
  double score_mean = 0.0;
  double score_max = 0.0;
  std::vector<std::string> drop_reasons;
};

struct QueryDiagnostics {
  std::string query_id;
  bool skipped = false;
  std::string skip_reason;
  std::vector<StepDiagnostics> steps;
};

/// Seed of candidate i (1-based) at timestep t:
///   base_seed + hash(query_id, t, i).
std::uint64_t candidate_seed(const DatagenConfig& cfg, const std::string& query_id, int t,
                             int i);

/// n stochastic region responses for the next step of `chain`. A failed
/// generation is retried once with a perturbed seed, then dropped. Throws
/// Error{skipped_query} when fewer than two candidates survive.
std::vector<Candidate> generate_candidates(Backend& backend, const ToyPolicy& policy,
                                           const Query& query, const ResponseChain& chain,
                                           const DatagenConfig& cfg, int t,
                                           StepDiagnostics* diag = nullptr);

/// score_cur: evaluator score of the answer produced from the candidate.
/// score_next: mean evaluator score over n_next_samples continuations (next
/// region, then its answer); 0 at t == T. score = score_cur + gamma * score_next,
/// with gamma treated as 0 at the final step. Candidates whose evaluation fails
/// entirely are dropped.
std::vector<ScoredCandidate> evaluate_responses(Backend& backend, const ToyPolicy& policy,
                                                const Query& query, const ResponseChain& chain,
                                                std::span<const Candidate> candidates,
                                                const DatagenConfig& cfg, int t,
                                                StepDiagnostics* diag = nullptr);

/// Up to k pairs drawn uniformly without replacement from the unordered
/// candidate pairs whose score gap exceeds min_margin and whose responses
/// differ; each oriented winner-first and attached to `chain`.
std::vector<PreferencePair> construct_pairs(const ResponseChain& chain,
                                            std::span<const ScoredCandidate> scored,
                                            const DatagenConfig& cfg, int t);

/// `chain` extended with the highest-scoring candidate (lowest index on ties).
ResponseChain select_best(const ResponseChain& chain, std::span<const ScoredCandidate> scored);

struct QueryResult {
  std::vector<PreferencePair> pairs;
  ResponseChain final_chain;
  QueryDiagnostics diagnostics;
};

/// Runs t = 1..T of generate / evaluate / pair / select for one query.
/// Propagates Error{skipped_query}.
QueryResult generate_for_query(Backend& backend, const ToyPolicy& policy, const Query& query,
                               const DatagenConfig& cfg);

struct DatasetResult {
  std::vector<PreferencePair> pairs;  // ordered by (query_id, timestep, pair index)
  std::vector<QueryDiagnostics> diagnostics;
  std::size_t skipped_queries = 0;

  /// {"queries":N,"skipped":S,"pairs":P,"per_query":[...]}
  std::string diagnostics_json() const;
};

/// generate_for_query over every query, cfg.workers at a time. Skipped queries
/// are recorded rather than thrown. Output is independent of worker count.
DatasetResult generate_dataset(Backend& backend, const ToyPolicy& policy,
                               std::span<const Query> queries, const DatagenConfig& cfg);

}  // namespace uvcot::datagen
