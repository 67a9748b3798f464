// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uvcot::verify {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  // Flips the sign of the logp gradient used by the gradient checks. Exists so
  // tests can confirm the checks actually catch a broken gradient.
  bool inject_grad_sign_flip = false;
  std::uint64_t seed = 2024;
  std::int64_t mc_samples = 1'000'000;
  int grad_configs = 100;
  int pair_sweep_queries = 1600;  // comfortably above 10k pairs on the two-stage sim
};

std::vector<PropertyResult> run_all(const VerifyOptions& opts = {});

/// Fixed-width pass/fail table, one row per property.
std::string format_table(const std::vector<PropertyResult>& results);

}  // namespace uvcot::verify
