// SPDX-License-Identifier: Apache-2.0
#include "uvcot/runs.hpp"

#include <charconv>

#include "uvcot/jsonl.hpp"
#include "uvcot/rng.hpp"

namespace uvcot::runs {

namespace {

constexpr std::uint64_t kTagHeldOut = 0x68656c646f7574ULL;

ToyPolicy initial_policy(const RunConfig& cfg,
                         const std::optional<std::filesystem::path>& policy_path) {
  if (!policy_path) return ToyPolicy(cfg.feature_dim());
  ToyPolicy p = ToyPolicy::load(*policy_path);
  if (p.feature_dim() != cfg.feature_dim()) {
    throw Error(ErrorKind::dimension_mismatch,
                "checkpoint has " + std::to_string(p.feature_dim()) +
                    " weights, benchmark needs " + std::to_string(cfg.feature_dim()),
                "feature_dim");
  }
  return p;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

GenDataSummary gen_data(const RunConfig& cfg, const std::filesystem::path& queries,
                        const std::filesystem::path& out,
                        const std::optional<std::filesystem::path>& policy_path) {
  cfg.validate();
  const auto qs = read_queries(queries);
  const ToyPolicy policy = initial_policy(cfg, policy_path);
  auto backend = make_backend(cfg.backend_descriptor());
  const auto data = datagen::generate_dataset(*backend, policy, qs, cfg.datagen_config());

  write_pairs(out, data.pairs);
  GenDataSummary s;
  s.diagnostics_path = out;
  s.diagnostics_path += ".diagnostics.json";
  write_text_file(s.diagnostics_path, data.diagnostics_json() + "\n");
  s.queries = qs.size();
  s.skipped_queries = data.skipped_queries;
  s.pairs = data.pairs.size();
  for (const auto& q : data.diagnostics) {
    for (const auto& st : q.steps) {
      s.dropped_generation += static_cast<std::size_t>(st.dropped_generation);
      s.dropped_evaluation += static_cast<std::size_t>(st.dropped_evaluation);
    }
  }
  return s;
}

TrainSummary train(const RunConfig& cfg, const std::filesystem::path& pairs_path,
                   const std::filesystem::path& queries, const std::filesystem::path& policy_in,
                   const std::filesystem::path& policy_out,
                   const std::optional<std::filesystem::path>& loss_csv) {
  cfg.validate();
  const auto pairs = read_pairs(pairs_path);
  const auto qs = read_queries(queries);
  const ToyPolicy policy = initial_policy(cfg, policy_in);
  const trainer::PairResolver resolver(qs);
  const auto batch = resolver.resolve_all(pairs);
  if (batch.pairs.empty()) {
    throw Error(ErrorKind::empty_result,
                "none of the " + std::to_string(pairs.size()) + " pairs could be resolved");
  }
  const auto result =
      trainer::train_on_pairs(policy, policy.snapshot_reference(), batch.pairs, cfg.train_config());
  result.policy.save(policy_out);

  TrainSummary s;
  s.pairs = batch.pairs.size();
  s.skipped_pairs = batch.skipped.size();
  s.loss_curve = result.loss_curve;
  if (loss_csv) {
    s.loss_csv = *loss_csv;
  } else {
    s.loss_csv = policy_out;
    s.loss_csv += ".loss.csv";
  }
  std::string csv = "epoch,mean_loss\n";
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
    csv += std::to_string(e) + "," + format_double(result.loss_curve[e]) + "\n";
  }
  write_text_file(s.loss_csv, csv);
  return s;
}

std::vector<bench::SyntheticTask> eval_tasks(const RunConfig& cfg) {
  return bench::make_tasks(static_cast<std::size_t>(cfg.bench.eval_tasks),
                           hash_combine(cfg.train.seed, kTagHeldOut), cfg.bench.grid_size,
                           cfg.bench.stage_mode, cfg.bench.p_hit, "eval-");
}

IterateSummary iterate(const RunConfig& cfg, const std::filesystem::path& queries,
                       const std::filesystem::path& out_dir) {
  cfg.validate();
  if (cfg.backend.kind != BackendKind::simulated) {
    throw Error(ErrorKind::config,
                "iterate trains the region policy on synthetic tasks; use the sim backend",
                "backend.kind");
  }
  const auto qs = read_queries(queries);
  const auto held_out = eval_tasks(cfg);
  const ToyPolicy initial(cfg.feature_dim());
  auto backend = make_backend(cfg.backend_descriptor());
  std::filesystem::create_directories(out_dir);

  IterateSummary s;
  s.baseline = bench::evaluate_policy(initial, held_out);
  const auto sink = [&](const trainer::IterationReport& r, const datagen::DatasetResult& data,
                        const ToyPolicy& policy) {
    const std::string i = std::to_string(r.iteration);
    policy.save(out_dir / ("policy_iter_" + i + ".json"));
    write_pairs(out_dir / ("pairs_iter_" + i + ".jsonl"), data.pairs);
    write_text_file(out_dir / ("diagnostics_iter_" + i + ".json"), data.diagnostics_json() + "\n");
  };
  const auto result = trainer::iterative_learn(initial, *backend, qs, cfg.datagen_config(),
                                               cfg.train_config(), held_out, sink);
  write_text_file(out_dir / "reports.json", trainer::reports_json(result.reports, cfg.label));
  s.reports = result.reports;
  s.aborted = result.aborted;
  s.abort_reason = result.abort_reason;
  return s;
}

void make_queries(const RunConfig& cfg, std::size_t count, std::uint64_t seed,
                  const std::filesystem::path& out) {
  const auto tasks = bench::make_tasks(count, seed, cfg.bench.grid_size, cfg.bench.stage_mode,
                                       cfg.bench.p_hit, "q");
  std::vector<Query> qs;
  qs.reserve(tasks.size());
  for (const auto& t : tasks) qs.push_back(t.to_query());
  write_queries(out, qs);
}

}  // namespace uvcot::runs
