// SPDX-License-Identifier: Apache-2.0
#include "uvcot/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>

#include "uvcot/backends.hpp"
#include "uvcot/datagen.hpp"
#include "uvcot/jsonl.hpp"
#include "uvcot/loss.hpp"
#include "uvcot/prefmath.hpp"
#include "uvcot/rng.hpp"
#include "uvcot/synthbench.hpp"
#include "uvcot/trainer.hpp"

namespace uvcot::verify {

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;
};

PropertyResult timed(std::string name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  PropertyResult r;
  r.name = std::move(name);
  try {
    const Outcome o = body();
    r.passed = o.passed;
    r.detail = o.detail;
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

loss::PairLogps random_logps(Rng& rng) {
  loss::PairLogps p;
  p.logp_w_policy = rng.uniform(-20.0, 0.0);
  p.logp_w_ref = rng.uniform(-20.0, 0.0);
  p.logp_l_policy = rng.uniform(-20.0, 0.0);
  p.logp_l_ref = rng.uniform(-20.0, 0.0);
  p.s_w = rng.uniform(0.0, 1.0);
  p.s_l = rng.uniform(0.0, 1.0);
  return p;
}

// |a - n| / max(|a|, |n|, floor). The floor keeps saturated configurations,
// where both values sit near zero, from reporting pure round-off.
double rel_err(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

trainer::GradFn grad_fn_for(const VerifyOptions& opts) {
  if (!opts.inject_grad_sign_flip) return {};
  return [](const loss::PairLogps& p, const loss::LossConfig& c) {
    loss::LogpGrad g = loss::sdpo_grad_logps(p, c);
    g.d_logp_w = -g.d_logp_w;
    g.d_logp_l = -g.d_logp_l;
    return g;
  };
}

Outcome sigmoid_symmetry() {
  double worst = 0.0;
  for (int i = -7000; i <= 7000; ++i) {
    const double x = i * 0.1;
    worst = std::max(worst, std::abs(prefmath::sigmoid(x) + prefmath::sigmoid(-x) - 1.0));
  }
  return {worst <= 1e-15, "max |s(x)+s(-x)-1| = " + num(worst)};
}

Outcome dpo_reduction(const VerifyOptions& opts) {
  Rng rng(hash_combine(opts.seed, 1));
  loss::LossConfig cfg;
  cfg.g_scale = 0.0;
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto p = random_logps(rng);
    cfg.beta = rng.uniform(0.01, 1.0);
    const double a = loss::sdpo_loss(p, cfg);
    const double b = loss::dpo_loss(p, cfg.beta);
    if (std::memcmp(&a, &b, sizeof a) != 0) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 10000 differ bitwise"};
}

Outcome loss_prob_consistency(const VerifyOptions& opts) {
  // exp(-loss) is the shifted preference probability of the implicit rewards.
  Rng rng(hash_combine(opts.seed, 2));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_logps(rng);
    loss::LossConfig cfg;
    cfg.beta = rng.uniform(0.01, 1.0);
    cfg.g_scale = rng.uniform(0.0, 2.0);
    const double r_w = cfg.beta * (p.logp_w_policy - p.logp_w_ref);
    const double r_l = cfg.beta * (p.logp_l_policy - p.logp_l_ref);
    const double delta = loss::score_margin(p, cfg);
    const double expected = prefmath::shifted_preference_prob(r_w, r_l, delta);
    worst = std::max(worst, std::abs(std::exp(-loss::sdpo_loss(p, cfg)) - expected));
  }
  return {worst <= 1e-12, "max |exp(-L) - P| = " + num(worst)};
}

Outcome partition_cancellation(const VerifyOptions& opts) {
  // Shifting every log-probability of one response by the same constant (a
  // normaliser change) leaves the loss unchanged.
  Rng rng(hash_combine(opts.seed, 3));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto p = random_logps(rng);
    loss::LossConfig cfg;
    cfg.beta = rng.uniform(0.01, 1.0);
    const double before = loss::sdpo_loss(p, cfg);
    const double c = rng.uniform(-5.0, 5.0);
    p.logp_w_policy += c;
    p.logp_w_ref += c;
    const double d = rng.uniform(-5.0, 5.0);
    p.logp_l_policy += d;
    p.logp_l_ref += d;
    worst = std::max(worst, std::abs(loss::sdpo_loss(p, cfg) - before));
  }
  return {worst <= 1e-12, "max |dL| = " + num(worst)};
}

Outcome logp_gradient(const VerifyOptions& opts) {
  Rng rng(hash_combine(opts.seed, 4));
  const auto flip = grad_fn_for(opts);
  const double h = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < opts.grad_configs; ++i) {
    const auto p = random_logps(rng);
    loss::LossConfig cfg;
    cfg.beta = rng.uniform(0.01, 1.0);
    cfg.g_scale = rng.uniform(0.0, 2.0);
    const loss::LogpGrad g = flip ? flip(p, cfg) : loss::sdpo_grad_logps(p, cfg);
    auto pw = p, mw = p, pl = p, ml = p;
    pw.logp_w_policy += h;
    mw.logp_w_policy -= h;
    pl.logp_l_policy += h;
    ml.logp_l_policy -= h;
    const double nw = (loss::sdpo_loss(pw, cfg) - loss::sdpo_loss(mw, cfg)) / (2 * h);
    const double nl = (loss::sdpo_loss(pl, cfg) - loss::sdpo_loss(ml, cfg)) / (2 * h);
    worst = std::max({worst, rel_err(g.d_logp_w, nw, 1e-4), rel_err(g.d_logp_l, nl, 1e-4)});
  }
  return {worst < 1e-6, "max rel err " + num(worst) + " over " +
                            std::to_string(opts.grad_configs) + " configs"};
}

Outcome weight_gradient(const VerifyOptions& opts) {
  Rng rng(hash_combine(opts.seed, 5));
  const auto grad_fn = grad_fn_for(opts);
  const double h = 1e-5;
  double worst = 0.0;
  for (int c = 0; c < opts.grad_configs; ++c) {
    const auto mode = (c % 2 == 1) ? bench::StageMode::single : bench::StageMode::two_stage;
    // 2x2 two-stage tasks leave a single cell at stage 2, so no pair exists there.
    const int grid = (c % 4 == 1) ? 2 : 4;
    const std::size_t dim = bench::feature_dim(mode);
    std::vector<double> w(dim), w_ref(dim);
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    for (auto& x : w_ref) x = rng.uniform(-1.0, 1.0);
    const ToyPolicy policy(w), reference(w_ref);

    std::vector<trainer::ResolvedPair> pairs;
    for (int j = 0; j < 4; ++j) {
      const auto task = bench::make_task(rng.next_u64(), grid, mode, 0.9, "t");
      const std::size_t stage = 1 + rng.below(bench::stage_count(mode));
      std::optional<BoundingBox> parent;
      if (stage == 2) {
        const auto quads = bench::candidate_set(task, 1);
        parent = quads.regions[rng.below(quads.regions.size())];
      }
      auto set = bench::candidate_set(task, stage, parent);
      trainer::ResolvedPair rp;
      rp.winner_index = rng.below(set.features.size());
      rp.loser_index = (rp.winner_index + 1 + rng.below(set.features.size() - 1)) %
                       set.features.size();
      rp.s_w = rng.uniform(0.0, 1.0);
      rp.s_l = rng.uniform(0.0, 1.0);
      rp.candidates = std::make_shared<const std::vector<RegionFeatures>>(std::move(set.features));
      pairs.push_back(std::move(rp));
    }
    loss::LossConfig cfg;
    cfg.beta = rng.uniform(0.05, 1.0);
    cfg.g_scale = rng.uniform(0.0, 2.0);

    const auto lg = trainer::loss_and_grad(policy, reference, pairs, cfg, grad_fn);
    for (std::size_t f = 0; f < dim; ++f) {
      auto wp = w, wm = w;
      wp[f] += h;
      wm[f] -= h;
      const double lp = trainer::loss_and_grad(ToyPolicy(wp), reference, pairs, cfg).mean_loss;
      const double lm = trainer::loss_and_grad(ToyPolicy(wm), reference, pairs, cfg).mean_loss;
      worst = std::max(worst, rel_err(lg.grad[f], (lp - lm) / (2 * h), 1e-4));
    }
  }
  return {worst < 1e-5, "max rel err " + num(worst) + " over " +
                            std::to_string(opts.grad_configs) + " configs"};
}

Outcome gumbel_grid(const VerifyOptions& opts) {
  const double diffs[] = {-1.0, 0.0, 1.5};
  const double deltas[] = {0.0, 0.5, 2.0};
  double worst_z = 0.0;
  int failures = 0;
  int cell = 0;
  for (double d : diffs) {
    for (double delta : deltas) {
      Rng rng(hash_combine(opts.seed, 6, cell++));
      const auto mc = prefmath::mc_preference_prob(d, 0.0, delta, opts.mc_samples, rng);
      const double expected = prefmath::sigmoid(d - delta);
      const double z = std::abs(mc.estimate - expected) / mc.std_err;
      worst_z = std::max(worst_z, z);
      if (z > 3.0) ++failures;
    }
  }
  return {failures == 0, "worst |z| = " + num(worst_z) + ", " + std::to_string(failures) +
                             " of 9 cells outside 3 SE"};
}

Outcome policy_normalization(const VerifyOptions& opts) {
  Rng rng(hash_combine(opts.seed, 7));
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto mode = (i % 2 == 0) ? bench::StageMode::single : bench::StageMode::two_stage;
    std::vector<double> w(bench::feature_dim(mode));
    for (auto& x : w) x = rng.uniform(-30.0, 30.0);
    const auto task = bench::make_task(rng.next_u64(), 4, mode, 0.9, "t");
    const auto set = bench::candidate_set(task, 1);
    double total = 0.0;
    for (double lp : ToyPolicy(w).log_probs(set.features)) total += std::exp(lp);
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return {worst <= 1e-12, "max |sum p - 1| = " + num(worst)};
}

struct SweepData {
  std::vector<PreferencePair> pairs;
  datagen::DatagenConfig cfg;
};

SweepData sweep_pairs(const VerifyOptions& opts) {
  SweepData out;
  out.cfg.t_steps = 2;
  out.cfg.gamma = 0.5;
  out.cfg.min_margin = 0.05;
  out.cfg.base_seed = opts.seed;
  const auto tasks = bench::make_tasks(static_cast<std::size_t>(opts.pair_sweep_queries),
                                       hash_combine(opts.seed, 8), 4,
                                       bench::StageMode::two_stage, 0.9, "v");
  std::vector<Query> qs;
  for (const auto& t : tasks) qs.push_back(t.to_query());
  SimulatedBackend backend(0.05);
  out.pairs = datagen::generate_dataset(backend, ToyPolicy(bench::feature_dim(
                                                     bench::StageMode::two_stage)),
                                        qs, out.cfg)
                  .pairs;
  return out;
}

Outcome pair_invariants(const SweepData& data) {
  std::size_t bad = 0, roundtrip_bad = 0;
  for (const auto& p : data.pairs) {
    try {
      validate_pair(p);
      if (!(p.winner.score > p.loser.score + data.cfg.min_margin)) ++bad;
    } catch (const Error&) {
      ++bad;
    }
    if (!(deserialize_pair(serialize_pair(p)) == p)) ++roundtrip_bad;
  }
  const bool ok = data.pairs.size() >= 10000 && bad == 0 && roundtrip_bad == 0;
  return {ok, std::to_string(data.pairs.size()) + " pairs, " + std::to_string(bad) +
                  " invariant failures, " + std::to_string(roundtrip_bad) +
                  " round-trip failures"};
}

Outcome score_structure(const SweepData& data) {
  std::size_t bad = 0, finals = 0;
  for (const auto& p : data.pairs) {
    const bool last = p.timestep == data.cfg.t_steps;
    finals += last ? 1 : 0;
    for (const ScoredResponse* r : {&p.winner, &p.loser}) {
      if (last) {
        if (r->score_next != 0.0 || r->score != r->score_cur) ++bad;
      } else if (r->score != r->score_cur + data.cfg.gamma * r->score_next) {
        ++bad;
      }
    }
  }
  const bool ok = bad == 0 && finals > 0 && finals < data.pairs.size();
  return {ok, std::to_string(bad) + " responses off the combination rule (" +
                  std::to_string(finals) + " final-step pairs)"};
}

}  // namespace

std::vector<PropertyResult> run_all(const VerifyOptions& opts) {
  std::vector<PropertyResult> out;
  out.push_back(timed("sigmoid symmetry", sigmoid_symmetry));
  out.push_back(timed("dpo reduction (g_scale=0)", [&] { return dpo_reduction(opts); }));
  out.push_back(timed("exp(-loss) = shifted preference", [&] { return loss_prob_consistency(opts); }));
  out.push_back(timed("normaliser cancellation", [&] { return partition_cancellation(opts); }));
  out.push_back(timed("gradient check: logps", [&] { return logp_gradient(opts); }));
  out.push_back(timed("gradient check: policy weights", [&] { return weight_gradient(opts); }));
  out.push_back(timed("gumbel monte-carlo 3x3", [&] { return gumbel_grid(opts); }));
  out.push_back(timed("policy normalisation", [&] { return policy_normalization(opts); }));

  SweepData data;
  std::string sweep_error;
  try {
    data = sweep_pairs(opts);
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }
  const auto needs_sweep = [&](const std::function<Outcome()>& f) {
    return [&, f] {
      if (!sweep_error.empty()) return Outcome{false, "pair generation failed: " + sweep_error};
      return f();
    };
  };
  out.push_back(timed("pair invariants + round-trip",
                      needs_sweep([&] { return pair_invariants(data); })));
  out.push_back(timed("score combination structure",
                      needs_sweep([&] { return score_structure(data); })));
  return out;
}

std::string format_table(const std::vector<PropertyResult>& results) {
  std::size_t width = 8;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::ostringstream os;
  for (const auto& r : results) {
    os << (r.passed ? "PASS  " : "FAIL  ") << r.name << std::string(width - r.name.size() + 2, ' ')
       << r.detail << "  [" << num(r.seconds) << "s]\n";
  }
  return os.str();
}

}  // namespace uvcot::verify
