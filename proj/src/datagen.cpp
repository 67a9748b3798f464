// SPDX-License-Identifier: Apache-2.0
#include "uvcot/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include "json.hpp"
#include "uvcot/rng.hpp"

namespace uvcot::datagen {

namespace {

constexpr std::uint64_t kTagRetry = 0x7265747279ULL;
constexpr std::uint64_t kTagAnswer = 0x616e73776572ULL;
constexpr std::uint64_t kTagEval = 0x6576616cULL;
constexpr std::uint64_t kTagNext = 0x6e657874ULL;
constexpr std::uint64_t kTagNextAnswer = 0x6e657874616eULL;
constexpr std::uint64_t kTagNextEval = 0x6e65787465ULL;
constexpr std::uint64_t kTagPairs = 0x7061697273ULL;
constexpr std::uint64_t kTagFinal = 0x66696e616cULL;

// Failures a backend can produce on a single sample; these drop the sample.
// Anything else (bad config, wrong task shape) is a caller bug and propagates.
bool is_sample_failure(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::transport:
    case ErrorKind::http_status:
    case ErrorKind::generation_failure:
    case ErrorKind::score_parse:
    case ErrorKind::no_match:
    case ErrorKind::malformed_number:
    case ErrorKind::pixel_coordinates:
    case ErrorKind::invariant:
      return true;
    default:
      return false;
  }
}

GenerationRequest gen_request(const ResponseChain& context, std::uint64_t seed,
                              const DatagenConfig& cfg, GenerationMode mode) {
  return GenerationRequest{context, seed, cfg.temperature, mode};
}

/// Answer reached from `context` (whose last step is a region), then scored.
double answer_and_score(Backend& backend, const ToyPolicy& policy, const Query& query,
                        const ResponseChain& context, std::uint64_t answer_seed,
                        std::uint64_t eval_seed, const DatagenConfig& cfg) {
  const ChainStep answer =
      backend.generate(query, gen_request(context, answer_seed, cfg, GenerationMode::emit_answer),
                       policy);
  if (answer.role != StepRole::answer)
    throw Error(ErrorKind::generation_failure, "backend returned a non-answer step");
  return backend.score(query, EvaluationRequest{context, answer, eval_seed});
}

}  // namespace

void DatagenConfig::validate() const {
  if (n_seeds < 2) throw Error(ErrorKind::config, "n_seeds must be >= 2", "datagen.n_seeds");
  if (k_pairs < 1) throw Error(ErrorKind::config, "k_pairs must be >= 1", "datagen.k_pairs");
  const long long max_pairs = static_cast<long long>(n_seeds) * (n_seeds - 1) / 2;
  if (k_pairs > max_pairs) {
    throw Error(ErrorKind::config,
                "k_pairs (" + std::to_string(k_pairs) + ") must be <= n_seeds*(n_seeds-1)/2 (" +
                    std::to_string(max_pairs) + ")",
                "datagen.k_pairs");
  }
  if (n_next_samples < 1)
    throw Error(ErrorKind::config, "n_next_samples must be >= 1", "datagen.n_next_samples");
  if (!(gamma >= 0.0)) throw Error(ErrorKind::config, "gamma must be >= 0", "loss.gamma");
  if (t_steps < 1) throw Error(ErrorKind::config, "t_steps must be >= 1", "datagen.t_steps");
  if (!(min_margin >= 0.0))
    throw Error(ErrorKind::config, "min_margin must be >= 0", "loss.min_margin");
  if (!(temperature > 0.0))
    throw Error(ErrorKind::config, "temperature must be > 0", "datagen.temperature");
  if (workers < 1) throw Error(ErrorKind::config, "workers must be >= 1", "datagen.workers");
}

std::uint64_t candidate_seed(const DatagenConfig& cfg, const std::string& query_id, int t,
                             int i) {
  return cfg.base_seed + hash_combine(hash_bytes(query_id), static_cast<std::uint64_t>(t),
                                      static_cast<std::uint64_t>(i));
}

std::vector<Candidate> generate_candidates(Backend& backend, const ToyPolicy& policy,
                                           const Query& query, const ResponseChain& chain,
                                           const DatagenConfig& cfg, int t,
                                           StepDiagnostics* diag) {
  if (t < 1 || t > cfg.t_steps) {
    throw Error(ErrorKind::invalid_argument, "timestep out of range", "t");
  }
  std::vector<Candidate> out;
  for (int i = 1; i <= cfg.n_seeds; ++i) {
    std::uint64_t seed = candidate_seed(cfg, query.query_id, t, i);
    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        ChainStep step = backend.generate(
            query, gen_request(chain, seed, cfg, GenerationMode::emit_region), policy);
        if (step.role != StepRole::region || !step.bbox)
          throw Error(ErrorKind::generation_failure, "backend returned a non-region step");
        out.push_back(Candidate{std::move(step), seed, static_cast<std::size_t>(i - 1)});
        break;
      } catch (const Error& e) {
        if (!is_sample_failure(e.kind())) throw;
        if (attempt == 1) {
          if (diag) {
            ++diag->dropped_generation;
            diag->drop_reasons.push_back("candidate " + std::to_string(i) + ": " + e.what());
          }
        }
        seed = mix64(seed ^ kTagRetry);
      }
    }
  }
  if (diag) diag->generated = static_cast<int>(out.size());
  if (out.size() < 2) {
    throw Error(ErrorKind::skipped_query,
                "query '" + query.query_id + "' has " + std::to_string(out.size()) +
                    " usable candidates at timestep " + std::to_string(t));
  }
  return out;
}

std::vector<ScoredCandidate> evaluate_responses(Backend& backend, const ToyPolicy& policy,
                                                const Query& query, const ResponseChain& chain,
                                                std::span<const Candidate> candidates,
                                                const DatagenConfig& cfg, int t,
                                                StepDiagnostics* diag) {
  const bool final_step = t >= cfg.t_steps;
  const double gamma = final_step ? 0.0 : cfg.gamma;
  std::vector<ScoredCandidate> out;
  for (const Candidate& cand : candidates) {
    const ResponseChain extended = chain.appended(cand.step);
    double score_cur = 0.0;
    try {
      score_cur = answer_and_score(backend, policy, query, extended,
                                   hash_combine(cand.seed, kTagAnswer),
                                   hash_combine(cand.seed, kTagEval), cfg);
    } catch (const Error& e) {
      if (!is_sample_failure(e.kind())) throw;
      if (diag) {
        ++diag->dropped_evaluation;
        diag->drop_reasons.push_back("candidate " + std::to_string(cand.index + 1) +
                                     " evaluation: " + e.what());
      }
      continue;
    }

    double score_next = 0.0;
    if (!final_step) {
      double total = 0.0;
      int ok = 0;
      std::string last_error;
      for (int j = 0; j < cfg.n_next_samples; ++j) {
        const auto jj = static_cast<std::uint64_t>(j);
        try {
          const ChainStep next = backend.generate(
              query,
              gen_request(extended, hash_combine(cand.seed, kTagNext, jj), cfg,
                          GenerationMode::emit_region),
              policy);
          total += answer_and_score(backend, policy, query, extended.appended(next),
                                    hash_combine(cand.seed, kTagNextAnswer, jj),
                                    hash_combine(cand.seed, kTagNextEval, jj), cfg);
          ++ok;
        } catch (const Error& e) {
          if (!is_sample_failure(e.kind())) throw;
          last_error = e.what();
        }
      }
      if (ok == 0) {
        if (diag) {
          ++diag->dropped_evaluation;
          diag->drop_reasons.push_back("candidate " + std::to_string(cand.index + 1) +
                                       " continuations: " + last_error);
        }
        continue;
      }
      score_next = total / ok;
    }
    out.push_back(ScoredCandidate{ScoredResponse::combine(cand.step, score_cur, score_next, gamma),
                                  cand.seed, cand.index});
  }
  if (diag && !out.empty()) {
    double lo = out.front().response.score, hi = lo, sum = 0.0;
    for (const auto& s : out) {
      lo = std::min(lo, s.response.score);
      hi = std::max(hi, s.response.score);
      sum += s.response.score;
    }
    diag->score_min = lo;
    diag->score_max = hi;
    diag->score_mean = sum / static_cast<double>(out.size());
  }
  return out;
}

std::vector<PreferencePair> construct_pairs(const ResponseChain& chain,
                                            std::span<const ScoredCandidate> scored,
                                            const DatagenConfig& cfg, int t) {
  std::vector<std::pair<std::size_t, std::size_t>> eligible;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    for (std::size_t j = i + 1; j < scored.size(); ++j) {
      const ScoredResponse& a = scored[i].response;
      const ScoredResponse& b = scored[j].response;
      if (std::abs(a.score - b.score) > cfg.min_margin && a.score != b.score &&
          !(a.step == b.step)) {
        eligible.emplace_back(i, j);
      }
    }
  }
  Rng rng(hash_combine(cfg.base_seed, hash_bytes(chain.query_id), static_cast<std::uint64_t>(t),
                       kTagPairs));
  const std::size_t take = std::min(eligible.size(), static_cast<std::size_t>(cfg.k_pairs));
  // Partial Fisher-Yates: the first `take` slots are a uniform sample.
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  std::vector<PreferencePair> out;
  out.reserve(take);
  for (std::size_t p = 0; p < take; ++p) {
    const ScoredResponse* w = &scored[eligible[p].first].response;
    const ScoredResponse* l = &scored[eligible[p].second].response;
    if (l->score > w->score) std::swap(w, l);
    PreferencePair pair;
    pair.query_id = chain.query_id;
    pair.timestep = t;
    pair.context = chain;
    pair.winner = *w;
    pair.loser = *l;
    pair.meta = PairMeta{cfg.gamma, static_cast<std::int64_t>(scored.size())};
    out.push_back(std::move(pair));
  }
  return out;
}

ResponseChain select_best(const ResponseChain& chain, std::span<const ScoredCandidate> scored) {
  if (scored.empty()) throw Error(ErrorKind::invalid_argument, "select_best needs a candidate");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scored.size(); ++i) {
    if (scored[i].response.score > scored[best].response.score) best = i;
  }
  return chain.appended(scored[best].response.step);
}

QueryResult generate_for_query(Backend& backend, const ToyPolicy& policy, const Query& query,
                               const DatagenConfig& cfg) {
  cfg.validate();
  QueryResult result;
  result.diagnostics.query_id = query.query_id;
  ResponseChain chain{query.query_id, {ChainStep::query(query.question)}};
  for (int t = 1; t <= cfg.t_steps; ++t) {
    StepDiagnostics diag;
    diag.timestep = t;
    const auto candidates = generate_candidates(backend, policy, query, chain, cfg, t, &diag);
    const auto scored = evaluate_responses(backend, policy, query, chain, candidates, cfg, t, &diag);
    if (scored.empty()) {
      throw Error(ErrorKind::skipped_query, "query '" + query.query_id +
                                                "' has no scorable candidates at timestep " +
                                                std::to_string(t));
    }
    auto pairs = construct_pairs(chain, scored, cfg, t);
    diag.pairs = static_cast<int>(pairs.size());
    std::move(pairs.begin(), pairs.end(), std::back_inserter(result.pairs));
    chain = select_best(chain, scored);
    result.diagnostics.steps.push_back(std::move(diag));
  }
  // Close the episode with the answer read from the selected region.
  try {
    chain = chain.appended(backend.generate(
        query,
        gen_request(chain, hash_combine(cfg.base_seed, hash_bytes(query.query_id), kTagFinal), cfg,
                    GenerationMode::emit_answer),
        policy));
  } catch (const Error& e) {
    if (!is_sample_failure(e.kind())) throw;
  }
  result.final_chain = std::move(chain);
  return result;
}

std::string DatasetResult::diagnostics_json() const {
  nlohmann::ordered_json j;
  j["queries"] = diagnostics.size();
  j["skipped"] = skipped_queries;
  j["pairs"] = pairs.size();
  auto per_query = nlohmann::ordered_json::array();
  for (const auto& q : diagnostics) {
    nlohmann::ordered_json jq;
    jq["query_id"] = q.query_id;
    if (q.skipped) jq["skip_reason"] = q.skip_reason;
    auto steps = nlohmann::ordered_json::array();
    for (const auto& s : q.steps) {
      nlohmann::ordered_json js;
      js["timestep"] = s.timestep;
      js["generated"] = s.generated;
      js["dropped_generation"] = s.dropped_generation;
      js["dropped_evaluation"] = s.dropped_evaluation;
      js["pairs"] = s.pairs;
      js["score_min"] = s.score_min;
      js["score_mean"] = s.score_mean;
      js["score_max"] = s.score_max;
      if (!s.drop_reasons.empty()) js["drop_reasons"] = s.drop_reasons;
      steps.push_back(std::move(js));
    }
    jq["steps"] = std::move(steps);
    per_query.push_back(std::move(jq));
  }
  j["per_query"] = std::move(per_query);
  return j.dump(2);
}

DatasetResult generate_dataset(Backend& backend, const ToyPolicy& policy,
                               std::span<const Query> queries, const DatagenConfig& cfg) {
  cfg.validate();
  std::vector<QueryResult> results(queries.size());
  std::vector<std::exception_ptr> errors(queries.size());
  std::atomic<std::size_t> next{0};

  const auto work = [&] {
    for (std::size_t i = next++; i < queries.size(); i = next++) {
      try {
        results[i] = generate_for_query(backend, policy, queries[i], cfg);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::skipped_query) {
          results[i].diagnostics.query_id = queries[i].query_id;
          results[i].diagnostics.skipped = true;
          results[i].diagnostics.skip_reason = e.what();
        } else {
          errors[i] = std::current_exception();
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), queries.size());
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(work);
  }

  DatasetResult out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    if (results[i].diagnostics.skipped) ++out.skipped_queries;
    std::move(results[i].pairs.begin(), results[i].pairs.end(), std::back_inserter(out.pairs));
    out.diagnostics.push_back(std::move(results[i].diagnostics));
  }
  std::stable_sort(out.pairs.begin(), out.pairs.end(),
                   [](const PreferencePair& a, const PreferencePair& b) {
                     if (a.query_id != b.query_id) return a.query_id < b.query_id;
                     return a.timestep < b.timestep;
                   });
  return out;
}

}  // namespace uvcot::datagen
