// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uvcot/backends.hpp"
#include "uvcot/datagen.hpp"
#include "uvcot/loss.hpp"
#include "uvcot/policy.hpp"
#include "uvcot/synthbench.hpp"

namespace uvcot::trainer {

enum class RefMode { per_iteration, initial };

const char* to_string(RefMode mode) noexcept;
RefMode ref_mode_from_string(std::string_view s);

struct TrainConfig {
  loss::LossConfig loss;
  double learning_rate = 0.5;
  int epochs = 4;
  int m_iterations = 4;
  std::uint64_t seed = 42;
  RefMode ref_mode = RefMode::per_iteration;

  void validate() const;
};

/// A pair mapped onto the candidate set its regions were drawn from.
struct ResolvedPair {
  std::shared_ptr<const std::vector<RegionFeatures>> candidates;
  std::size_t winner_index = 0;
  std::size_t loser_index = 0;
  double s_w = 0.0;
  double s_l = 0.0;
};

/// Maps pair regions back onto synthetic-task candidate sets.
class PairResolver {
 public:
  explicit PairResolver(std::span<const bench::SyntheticTask> tasks);
  explicit PairResolver(std::span<const Query> queries);

  /// Throws Error{unresolvable_region} when the query is unknown or a region
  /// matches no candidate within 1e-9.
  ResolvedPair resolve(const PreferencePair& pair) const;

  struct Batch {
    std::vector<ResolvedPair> pairs;
    std::vector<std::string> skipped;  // one reason per skipped pair
  };
  Batch resolve_all(std::span<const PreferencePair> pairs) const;

 private:
  std::map<std::string, bench::SyntheticTask> tasks_;
};

/// The four chain log-probabilities: only region choices are learnable, so a
/// chain's probability reduces to its region step's probability.
loss::PairLogps pair_logps(const ToyPolicy& policy, const ToyPolicy& reference,
                           const ResolvedPair& pair);

using GradFn = std::function<loss::LogpGrad(const loss::PairLogps&, const loss::LossConfig&)>;

/// Mean batch loss and its gradient with respect to the policy weights:
///   mean_p [ dL/dlogp_w * grad logp_w + dL/dlogp_l * grad logp_l ].
struct LossAndGrad {
  double mean_loss = 0.0;
  std::vector<double> grad;
};
LossAndGrad loss_and_grad(const ToyPolicy& policy, const ToyPolicy& reference,
                          std::span<const ResolvedPair> pairs, const loss::LossConfig& cfg,
                          const GradFn& grad_fn = {});

struct TrainResult {
  ToyPolicy policy;
  /// loss_curve[e] is the mean loss after e updates, e = 0..epochs.
  std::vector<double> loss_curve;
};

/// Full-batch gradient descent, one update per epoch. Throws
/// Error{empty_result} for an empty batch.
TrainResult train_on_pairs(const ToyPolicy& policy, const ToyPolicy& reference,
                           std::span<const ResolvedPair> pairs, const TrainConfig& cfg,
                           const GradFn& grad_fn = {});

struct IterationReport {
  int iteration = 0;
  std::int64_t n_pairs = 0;
  std::int64_t n_skipped_pairs = 0;
  double mean_loss_start = 0.0;
  double mean_loss_end = 0.0;
  double eval_score = 0.0;
  double region_accuracy = 0.0;
};

/// Called after each completed iteration with the data it generated and the
/// policy it produced.
using IterationSink = std::function<void(const IterationReport&, const datagen::DatasetResult&,
                                         const ToyPolicy&)>;

struct IterateResult {
  ToyPolicy policy;
  std::vector<IterationReport> reports;
  bool aborted = false;
  std::string abort_reason;
};

/// Splits queries into m subsets after a seeded shuffle (remainder to the
/// last subset). Subset order equals iteration order.
std::vector<std::vector<Query>> split_queries(std::span<const Query> queries, int m,
                                              std::uint64_t seed);

/// Alternates data generation with the current policy and training on the
/// fresh pairs; evaluates on `eval_tasks` after every iteration. Stops early
/// (aborted = true) when an iteration yields no usable pairs.
IterateResult iterative_learn(const ToyPolicy& initial, Backend& backend,
                              std::span<const Query> queries,
                              const datagen::DatagenConfig& datagen_cfg,
                              const TrainConfig& train_cfg,
                              std::span<const bench::SyntheticTask> eval_tasks,
                              const IterationSink& sink = {});

std::string reports_json(std::span<const IterationReport> reports, const std::string& label);

}  // namespace uvcot::trainer
