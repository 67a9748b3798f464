// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "uvcot/backends.hpp"
#include "uvcot/datagen.hpp"
#include "uvcot/loss.hpp"
#include "uvcot/synthbench.hpp"
#include "uvcot/trainer.hpp"

namespace uvcot {

struct BenchConfig {
  int grid_size = 4;
  bench::StageMode stage_mode = bench::StageMode::single;
  double p_hit = 0.9;
  int eval_tasks = 1000;
};

/// Every tunable of a run, loaded from one sectioned key=value file:
///
///   [loss]    beta gamma g_scale min_margin
///   [datagen] n_seeds k_pairs n_next_samples t_steps base_seed temperature workers
///   [train]   learning_rate epochs m_iterations ref_mode seed
///   [bench]   grid_size stage_mode p_hit eval_tasks
///   [backend] kind endpoint model_name max_retries max_inflight noise_eta
///             retry_base_ms timeout_s prompt_dir
///   [data]    queries
///
/// Keys may also be set as "section.key" overrides. Environment:
/// UVCOT_API_KEY (bearer token), UVCOT_API_BASE (endpoint override).
struct RunConfig {
  loss::LossConfig loss;
  datagen::DatagenConfig datagen;
  trainer::TrainConfig train;
  BenchConfig bench;
  BackendDescriptor backend;
  std::optional<std::filesystem::path> queries;
  std::optional<std::filesystem::path> prompt_dir;
  std::string label = "sdpo";

  /// Parse + apply_environment + validate. Throws Error{config|parse|io}.
  static RunConfig load(const std::filesystem::path& path);
  /// Parse only; relative paths are resolved against `base_dir`.
  static RunConfig parse(std::string_view text,
                         const std::filesystem::path& base_dir = {});

  void set(std::string_view dotted_key, std::string_view value);

  /// Named presets: "no-gamma" (gamma = 0), "naive-dpo" (g_scale = 0),
  /// "single-pass" (m_iterations = 1). Also sets `label`.
  void apply_ablation(std::string_view name);

  void apply_environment();

  /// Field ranges, k <= n(n-1)/2, simulator T equal to the stage count,
  /// and existence of referenced files.
  void validate() const;

  /// Loss-section values (gamma, min_margin) copied into the datagen config.
  datagen::DatagenConfig datagen_config() const;
  trainer::TrainConfig train_config() const;
  BackendDescriptor backend_descriptor() const;
  std::size_t feature_dim() const { return bench::feature_dim(bench.stage_mode); }
};

}  // namespace uvcot
