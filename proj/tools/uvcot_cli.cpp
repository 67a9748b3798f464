// SPDX-License-Identifier: Apache-2.0
// uvcot command line. Exit codes: 0 ok, 1 usage/config/IO, 2 empty result,
// 3 partial iteration.
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uvcot/uvcot.h"

namespace {

struct ConfigDeleter {
  void operator()(uvcot_config* c) const { uvcot_config_free(c); }
};
using ConfigPtr = std::unique_ptr<uvcot_config, ConfigDeleter>;

int report_failure(uvcot_status s) {
  std::cerr << "uvcot: " << uvcot_last_error() << "\n";
  return uvcot_exit_code(s);
}

// Loads the config, then applies --set overrides and an optional ablation
// preset before validating again.
std::optional<ConfigPtr> open_config(const std::string& path, const std::vector<std::string>& sets,
                                     const std::string& ablate, int& exit_code) {
  uvcot_config* raw = nullptr;
  uvcot_status s = uvcot_config_load(path.c_str(), &raw);
  if (s != UVCOT_OK) {
    exit_code = report_failure(s);
    return std::nullopt;
  }
  ConfigPtr cfg(raw);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "uvcot: --set expects section.key=value, got '" << kv << "'\n";
      exit_code = 1;
      return std::nullopt;
    }
    s = uvcot_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != UVCOT_OK) {
      exit_code = report_failure(s);
      return std::nullopt;
    }
  }
  if (!ablate.empty()) {
    s = uvcot_config_apply_ablation(cfg.get(), ablate.c_str());
    if (s != UVCOT_OK) {
      exit_code = report_failure(s);
      return std::nullopt;
    }
  }
  s = uvcot_config_validate(cfg.get());
  if (s != UVCOT_OK) {
    exit_code = report_failure(s);
    return std::nullopt;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uvcot: score-weighted preference learning for region reasoning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(uvcot_version()));

  std::string config_path, queries, out, policy, pairs, policy_in, policy_out, loss_csv,
      out_dir, backend, ablate, fault;
  std::vector<std::string> sets;
  std::size_t count = 0;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen-data", "generate preference pairs for a query file");
  gen->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  gen->add_option("--queries", queries, "query JSONL")->required();
  gen->add_option("--out", out, "output pair JSONL")->required();
  gen->add_option("--backend", backend, "override backend.kind")
      ->check(CLI::IsMember({"sim", "http"}));
  gen->add_option("--policy", policy, "policy checkpoint (default: uniform)");
  gen->add_option("--set", sets, "override a config key, section.key=value");

  auto* train = app.add_subcommand("train", "train one iteration on a pair file");
  train->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  train->add_option("--pairs", pairs, "pair JSONL")->required();
  train->add_option("--queries", queries, "query JSONL (default: data.queries)");
  train->add_option("--policy-in", policy_in, "input checkpoint, also the reference")->required();
  train->add_option("--policy-out", policy_out, "output checkpoint")->required();
  train->add_option("--loss-csv", loss_csv, "loss curve (default: <policy-out>.loss.csv)");
  train->add_option("--set", sets, "override a config key, section.key=value");

  auto* iterate = app.add_subcommand("iterate", "run the full iterative loop");
  iterate->add_option("--config", config_path, "config file")
      ->required()
      ->check(CLI::ExistingFile);
  iterate->add_option("--queries", queries, "query JSONL (default: data.queries)");
  iterate->add_option("--out-dir", out_dir, "output directory")->required();
  iterate->add_option("--ablate", ablate, "ablation preset")
      ->check(CLI::IsMember({"no-gamma", "naive-dpo", "single-pass"}));
  iterate->add_option("--set", sets, "override a config key, section.key=value");

  auto* verify = app.add_subcommand("verify", "run the property suite");
  verify->add_option("--inject-fault", fault, "deliberately break a component")
      ->check(CLI::IsMember({"grad-sign"}));

  auto* mk = app.add_subcommand("make-tasks", "write synthetic benchmark queries");
  mk->add_option("--config", config_path, "config file (bench section)")
      ->required()
      ->check(CLI::ExistingFile);
  mk->add_option("--count", count, "number of queries")->required();
  mk->add_option("--seed", seed, "generation seed")->required();
  mk->add_option("--out", out, "output query JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  int exit_code = 0;
  if (*verify) {
    char* table = nullptr;
    const uvcot_status s = uvcot_run_verify(fault == "grad-sign" ? 1 : 0, &table);
    if (table) {
      std::cout << table;
      uvcot_string_free(table);
    }
    if (s != UVCOT_OK) {
      std::cerr << "uvcot: " << uvcot_last_error() << "\n";
      return 1;
    }
    std::cout << "all properties passed\n";
    return 0;
  }

  if (!backend.empty()) sets.push_back("backend.kind=" + backend);
  auto cfg = open_config(config_path, sets, ablate, exit_code);
  if (!cfg) return exit_code;

  const auto queries_or_config = [&]() -> std::optional<std::string> {
    if (!queries.empty()) return queries;
    if (const char* q = uvcot_config_queries_path(cfg->get())) return std::string(q);
    std::cerr << "uvcot: no query file; pass --queries or set data.queries\n";
    return std::nullopt;
  };

  if (*gen) {
    uvcot_gen_data_summary sum{};
    const uvcot_status s = uvcot_run_gen_data(cfg->get(), queries.c_str(), out.c_str(),
                                              policy.empty() ? nullptr : policy.c_str(), &sum);
    if (s != UVCOT_OK && s != UVCOT_ERR_EMPTY_RESULT) return report_failure(s);
    std::cout << "queries " << sum.queries << " (skipped " << sum.skipped_queries << ")\n"
              << "pairs " << sum.pairs << "\n"
              << "dropped generation " << sum.dropped_generation << ", evaluation "
              << sum.dropped_evaluation << "\n";
    if (s != UVCOT_OK) return report_failure(s);
    return 0;
  }

  if (*train) {
    const auto q = queries_or_config();
    if (!q) return 1;
    uvcot_train_summary sum{};
    const uvcot_status s =
        uvcot_run_train(cfg->get(), pairs.c_str(), q->c_str(), policy_in.c_str(),
                        policy_out.c_str(), loss_csv.empty() ? nullptr : loss_csv.c_str(), &sum);
    if (s != UVCOT_OK) return report_failure(s);
    std::cout << "pairs " << sum.pairs << " (skipped " << sum.skipped_pairs << ")\n"
              << "epochs " << sum.epochs << ", loss " << sum.loss_start << " -> " << sum.loss_end
              << "\n";
    return 0;
  }

  if (*iterate) {
    const auto q = queries_or_config();
    if (!q) return 1;
    uvcot_iterate_summary sum{};
    const uvcot_status s = uvcot_run_iterate(cfg->get(), q->c_str(), out_dir.c_str(), &sum);
    if (s != UVCOT_OK && s != UVCOT_ERR_PARTIAL_ITERATION) return report_failure(s);
    std::cout << "completed iterations " << sum.completed_iterations << "\n"
              << "region accuracy " << sum.baseline_region_accuracy << " -> "
              << sum.final_region_accuracy << "\n"
              << "answer score " << sum.baseline_answer_score << " -> "
              << sum.final_answer_score << "\n";
    if (s != UVCOT_OK) return report_failure(s);
    return 0;
  }

  if (*mk) {
    const uvcot_status s = uvcot_make_queries(cfg->get(), count, seed, out.c_str());
    if (s != UVCOT_OK) return report_failure(s);
    std::cout << "wrote " << count << " queries to " << out << "\n";
    return 0;
  }
  return 1;
}
