// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uvcot/config.hpp"
#include "uvcot/trainer.hpp"

namespace uvcot::runs {

// Whole-command entry points behind the CLI. Each is a pure function of the
// config, its input files and seeds; outputs never depend on wall-clock time.

struct GenDataSummary {
  std::size_t queries = 0;
  std::size_t skipped_queries = 0;
  std::size_t pairs = 0;
  std::size_t dropped_generation = 0;
  std::size_t dropped_evaluation = 0;
  std::filesystem::path diagnostics_path;
};

/// Writes the pair file and `<out>.diagnostics.json`. The policy defaults to
/// the zero (uniform) policy of the configured benchmark.
GenDataSummary gen_data(const RunConfig& cfg, const std::filesystem::path& queries,
                        const std::filesystem::path& out,
                        const std::optional<std::filesystem::path>& policy_path = std::nullopt);

struct TrainSummary {
  std::size_t pairs = 0;
  std::size_t skipped_pairs = 0;
  std::vector<double> loss_curve;
  std::filesystem::path loss_csv;
};

/// One sDPO training pass with the input checkpoint as reference. Writes the
/// output checkpoint and an `epoch,mean_loss` CSV (default
/// `<policy_out>.loss.csv`). Throws Error{empty_result} when no pair resolves.
TrainSummary train(const RunConfig& cfg, const std::filesystem::path& pairs,
                   const std::filesystem::path& queries, const std::filesystem::path& policy_in,
                   const std::filesystem::path& policy_out,
                   const std::optional<std::filesystem::path>& loss_csv = std::nullopt);

struct IterateSummary {
  std::vector<trainer::IterationReport> reports;
  bench::PolicyEval baseline;
  bool aborted = false;
  std::string abort_reason;
};

/// Held-out evaluation tasks for a config (seeds disjoint from query files
/// produced by make_queries with the same seed).
std::vector<bench::SyntheticTask> eval_tasks(const RunConfig& cfg);

/// Full iterative loop. Writes policy_iter_<i>.json, pairs_iter_<i>.jsonl and
/// diagnostics_iter_<i>.json per completed iteration, and reports.json.
IterateSummary iterate(const RunConfig& cfg, const std::filesystem::path& queries,
                       const std::filesystem::path& out_dir);

/// Writes `count` synthetic queries for the config's benchmark.
void make_queries(const RunConfig& cfg, std::size_t count, std::uint64_t seed,
                  const std::filesystem::path& out);

}  // namespace uvcot::runs
