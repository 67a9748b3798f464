// SPDX-License-Identifier: Apache-2.0
#include "uvcot/trainer.hpp"

#include <cmath>

#include "json.hpp"
#include "uvcot/rng.hpp"

namespace uvcot::trainer {

const char* to_string(RefMode mode) noexcept {
  return mode == RefMode::per_iteration ? "per_iteration" : "initial";
}

RefMode ref_mode_from_string(std::string_view s) {
  if (s == "per_iteration") return RefMode::per_iteration;
  if (s == "initial") return RefMode::initial;
  throw Error(ErrorKind::config, "unknown ref_mode '" + std::string(s) + "'", "train.ref_mode");
}

void TrainConfig::validate() const {
  loss.validate();
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw Error(ErrorKind::config, "learning_rate must be >= 0", "train.learning_rate");
  if (epochs < 1) throw Error(ErrorKind::config, "epochs must be >= 1", "train.epochs");
  if (m_iterations < 1)
    throw Error(ErrorKind::config, "m_iterations must be >= 1", "train.m_iterations");
}

// ---------------------------------------------------------------------------
// Pair resolution

PairResolver::PairResolver(std::span<const bench::SyntheticTask> tasks) {
  for (const auto& t : tasks) tasks_.emplace(t.task_id, t);
}

PairResolver::PairResolver(std::span<const Query> queries) {
  for (const auto& q : queries) tasks_.emplace(q.query_id, bench::SyntheticTask::from_query(q));
}

ResolvedPair PairResolver::resolve(const PreferencePair& pair) const {
  const auto it = tasks_.find(pair.query_id);
  if (it == tasks_.end()) {
    throw Error(ErrorKind::unresolvable_region, "unknown query '" + pair.query_id + "'",
                "query_id");
  }
  bench::CandidateSet set;
  try {
    set = bench::candidate_set_for(it->second, pair.context);
  } catch (const Error& e) {
    throw Error(ErrorKind::unresolvable_region, e.what(), "context");
  }
  const auto index_of = [&](const ScoredResponse& r, const char* who) {
    if (!r.step.bbox) {
      throw Error(ErrorKind::unresolvable_region, "response has no region",
                  std::string(who) + ".bbox");
    }
    const auto idx = set.find(*r.step.bbox, 1e-9);
    if (!idx) {
      throw Error(ErrorKind::unresolvable_region,
                  "region " + r.step.bbox->to_string() + " is not a candidate cell",
                  std::string(who) + ".bbox");
    }
    return *idx;
  };
  ResolvedPair out;
  out.winner_index = index_of(pair.winner, "winner");
  out.loser_index = index_of(pair.loser, "loser");
  out.s_w = pair.winner.score;
  out.s_l = pair.loser.score;
  out.candidates = std::make_shared<const std::vector<RegionFeatures>>(std::move(set.features));
  return out;
}

PairResolver::Batch PairResolver::resolve_all(std::span<const PreferencePair> pairs) const {
  Batch batch;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      batch.pairs.push_back(resolve(pairs[i]));
    } catch (const Error& e) {
      batch.skipped.push_back("pair " + std::to_string(i) + ": " + e.what());
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Loss and gradient

loss::PairLogps pair_logps(const ToyPolicy& policy, const ToyPolicy& reference,
                           const ResolvedPair& pair) {
  const auto lp = policy.log_probs(*pair.candidates);
  const auto lr = reference.log_probs(*pair.candidates);
  return loss::PairLogps{lp.at(pair.winner_index), lr.at(pair.winner_index),
                         lp.at(pair.loser_index), lr.at(pair.loser_index), pair.s_w, pair.s_l};
}

namespace {

struct RefLogps {
  double w = 0.0;
  double l = 0.0;
};

std::vector<RefLogps> reference_logps(const ToyPolicy& reference,
                                      std::span<const ResolvedPair> pairs) {
  std::vector<RefLogps> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto lr = reference.log_probs(*p.candidates);
    out.push_back({lr.at(p.winner_index), lr.at(p.loser_index)});
  }
  return out;
}

LossAndGrad evaluate(const ToyPolicy& policy, std::span<const ResolvedPair> pairs,
                     std::span<const RefLogps> ref, const loss::LossConfig& cfg,
                     const GradFn& grad_fn) {
  LossAndGrad out;
  out.grad.assign(policy.feature_dim(), 0.0);
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ResolvedPair& p = pairs[i];
    const auto& feats = *p.candidates;
    const auto lp = policy.log_probs(feats);
    const loss::PairLogps logps{lp[p.winner_index], ref[i].w, lp[p.loser_index], ref[i].l,
                                p.s_w, p.s_l};
    loss_sum += loss::sdpo_loss(logps, cfg);
    const loss::LogpGrad d = grad_fn ? grad_fn(logps, cfg) : loss::sdpo_grad_logps(logps, cfg);
    // grad log pi(k) = phi_k - E_pi[phi]; the expectation term is shared.
    std::vector<double> expected(policy.feature_dim(), 0.0);
    for (std::size_t j = 0; j < feats.size(); ++j) {
      const double pj = std::exp(lp[j]);
      for (std::size_t f = 0; f < expected.size(); ++f) expected[f] += pj * feats[j].values[f];
    }
    const auto& phi_w = feats[p.winner_index].values;
    const auto& phi_l = feats[p.loser_index].values;
    for (std::size_t f = 0; f < out.grad.size(); ++f) {
      out.grad[f] += d.d_logp_w * (phi_w[f] - expected[f]) + d.d_logp_l * (phi_l[f] - expected[f]);
    }
  }
  const double n = static_cast<double>(pairs.size());
  out.mean_loss = loss_sum / n;
  for (double& g : out.grad) g /= n;
  return out;
}

}  // namespace

LossAndGrad loss_and_grad(const ToyPolicy& policy, const ToyPolicy& reference,
                          std::span<const ResolvedPair> pairs, const loss::LossConfig& cfg,
                          const GradFn& grad_fn) {
  if (pairs.empty()) throw Error(ErrorKind::empty_result, "no usable pairs");
  const auto ref = reference_logps(reference, pairs);
  return evaluate(policy, pairs, ref, cfg, grad_fn);
}

TrainResult train_on_pairs(const ToyPolicy& policy, const ToyPolicy& reference,
                           std::span<const ResolvedPair> pairs, const TrainConfig& cfg,
                           const GradFn& grad_fn) {
  cfg.validate();
  if (pairs.empty()) throw Error(ErrorKind::empty_result, "no usable pairs to train on");
  if (policy.feature_dim() != reference.feature_dim()) {
    throw Error(ErrorKind::dimension_mismatch, "policy and reference dimensions differ");
  }
  // The reference is frozen for the whole call, so its log-probabilities are
  // computed once.
  const auto ref = reference_logps(reference, pairs);
  TrainResult out{policy, {}};
  out.loss_curve.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const LossAndGrad lg = evaluate(out.policy, pairs, ref, cfg.loss, grad_fn);
    out.loss_curve.push_back(lg.mean_loss);
    auto w = out.policy.mutable_weights();
    for (std::size_t f = 0; f < w.size(); ++f) w[f] -= cfg.learning_rate * lg.grad[f];
  }
  out.loss_curve.push_back(evaluate(out.policy, pairs, ref, cfg.loss, grad_fn).mean_loss);
  return out;
}

// ---------------------------------------------------------------------------
// Iterative learning

std::vector<std::vector<Query>> split_queries(std::span<const Query> queries, int m,
                                              std::uint64_t seed) {
  if (m < 1) throw Error(ErrorKind::config, "m_iterations must be >= 1", "train.m_iterations");
  std::vector<Query> shuffled(queries.begin(), queries.end());
  Rng rng(hash_combine(seed, 0x73706c6974ULL));
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(rng.below(i))]);
  }
  const std::size_t per = shuffled.size() / static_cast<std::size_t>(m);
  std::vector<std::vector<Query>> out(static_cast<std::size_t>(m));
  std::size_t pos = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t take = (i + 1 == out.size()) ? shuffled.size() - pos : per;
    out[i].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                  shuffled.begin() + static_cast<std::ptrdiff_t>(pos + take));
    pos += take;
  }
  return out;
}

IterateResult iterative_learn(const ToyPolicy& initial, Backend& backend,
                              std::span<const Query> queries,
                              const datagen::DatagenConfig& datagen_cfg,
                              const TrainConfig& train_cfg,
                              std::span<const bench::SyntheticTask> eval_tasks,
                              const IterationSink& sink) {
  train_cfg.validate();
  datagen_cfg.validate();
  const PairResolver resolver(queries);
  const auto subsets = split_queries(queries, train_cfg.m_iterations, train_cfg.seed);
  const ToyPolicy initial_reference = initial.snapshot_reference();

  IterateResult result{initial, {}, false, {}};
  for (int i = 1; i <= train_cfg.m_iterations; ++i) {
    const auto& subset = subsets[static_cast<std::size_t>(i - 1)];
    const datagen::DatasetResult data =
        datagen::generate_dataset(backend, result.policy, subset, datagen_cfg);
    const ToyPolicy reference = train_cfg.ref_mode == RefMode::per_iteration
                                    ? result.policy.snapshot_reference()
                                    : initial_reference;
    const auto batch = resolver.resolve_all(data.pairs);
    if (batch.pairs.empty()) {
      result.aborted = true;
      result.abort_reason = "iteration " + std::to_string(i) + " produced no usable pairs (" +
                            std::to_string(data.pairs.size()) + " generated, " +
                            std::to_string(data.skipped_queries) + " queries skipped)";
      break;
    }
    const TrainResult trained =
        train_on_pairs(result.policy, reference, batch.pairs, train_cfg);
    result.policy = trained.policy;

    IterationReport report;
    report.iteration = i;
    report.n_pairs = static_cast<std::int64_t>(batch.pairs.size());
    report.n_skipped_pairs = static_cast<std::int64_t>(batch.skipped.size());
    report.mean_loss_start = trained.loss_curve.front();
    report.mean_loss_end = trained.loss_curve.back();
    if (!eval_tasks.empty()) {
      const auto ev = bench::evaluate_policy(result.policy, eval_tasks);
      report.eval_score = ev.answer_score;
      report.region_accuracy = ev.region_accuracy;
    }
    result.reports.push_back(report);
    if (sink) sink(report, data, result.policy);
  }
  return result;
}

std::string reports_json(std::span<const IterationReport> reports, const std::string& label) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["label"] = label;
    j["iteration"] = r.iteration;
    j["n_pairs"] = r.n_pairs;
    j["n_skipped_pairs"] = r.n_skipped_pairs;
    j["mean_loss_start"] = r.mean_loss_start;
    j["mean_loss_end"] = r.mean_loss_end;
    j["eval_score"] = r.eval_score;
    j["region_accuracy"] = r.region_accuracy;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace uvcot::trainer
