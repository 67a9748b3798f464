// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace uvcot {

/// phi(x, b): engineered features of one candidate region.
struct RegionFeatures {
  std::vector<double> values;
};

/// Linear-softmax distribution over a candidate region set:
///   pi(i) = exp(w . phi_i) / sum_j exp(w . phi_j).
/// Stands in for the bbox-emitting head of the target model.
class ToyPolicy {
 public:
  explicit ToyPolicy(std::size_t feature_dim);
  explicit ToyPolicy(std::vector<double> weights);

  std::size_t feature_dim() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> mutable_weights() noexcept { return weights_; }

  /// w . phi for each candidate. Throws Error{dimension_mismatch}.
  std::vector<double> logits(std::span<const RegionFeatures> candidates) const;

  /// log softmax over candidates, max-subtracted.
  std::vector<double> log_probs(std::span<const RegionFeatures> candidates) const;

  double region_logprob(std::span<const RegionFeatures> candidates, std::size_t index) const;

  /// d/dw log pi(index) = phi_index - sum_j pi(j) phi_j.
  std::vector<double> logprob_grad(std::span<const RegionFeatures> candidates,
                                   std::size_t index) const;

  /// Categorical draw from softmax(logits / temperature) using a source
  /// seeded with `seed`. Below kGreedyTemperature the draw becomes argmax
  /// (ties to the lowest index). Throws on temperature <= 0.
  std::size_t sample_region(std::span<const RegionFeatures> candidates, std::uint64_t seed,
                            double temperature) const;

  std::size_t greedy_region(std::span<const RegionFeatures> candidates) const;

  /// Independent deep copy; later updates to *this never reach it.
  ToyPolicy snapshot_reference() const { return ToyPolicy(weights_); }

  /// {"feature_dim":F,"weights":[...]}
  std::string to_json() const;
  static ToyPolicy from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ToyPolicy load(const std::filesystem::path& path);

  friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;

  static constexpr double kGreedyTemperature = 1e-6;

 private:
  void check_dims(std::span<const RegionFeatures> candidates) const;

  std::vector<double> weights_;
};

}  // namespace uvcot
