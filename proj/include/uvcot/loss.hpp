// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

namespace uvcot::loss {

enum class GKind { affine };

struct LossConfig {
  double beta = 0.1;
  double gamma = 0.5;     // consumed by datagen when combining scores
  GKind g_kind = GKind::affine;
  double g_scale = 1.0;   // alpha in g(s) = alpha * s
  double min_margin = 0.0;

  /// Throws Error{config} when beta <= 0, gamma < 0, g_scale < 0 or
  /// min_margin < 0.
  void validate() const;
};

/// Chain log-probabilities of one pair under the trained and reference
/// policies, plus the two preference scores.
struct PairLogps {
  double logp_w_policy = 0.0;
  double logp_w_ref = 0.0;
  double logp_l_policy = 0.0;
  double logp_l_ref = 0.0;
  double s_w = 0.0;
  double s_l = 0.0;
};

struct LogpGrad {
  double d_logp_w = 0.0;
  double d_logp_l = 0.0;
};

/// g(s) = g_scale * s. Non-decreasing; strictly increasing iff g_scale > 0.
double g_map(double s, const LossConfig& cfg) noexcept;

/// Delta_r = g(s_w) - g(s_l).
double score_margin(const PairLogps& p, const LossConfig& cfg) noexcept;

/// r(x,y_w) - r(x,y_l) with r = beta * log(pi/pi_ref) + beta * log Z(x).
/// Both rewards share the same x, so the partition terms cancel and only the
/// two log-ratios remain:
///   beta * [(logp_w_policy - logp_w_ref) - (logp_l_policy - logp_l_ref)].
double implicit_reward_diff(const PairLogps& p, double beta) noexcept;

/// Argument of the sigmoid inside the score-margin loss:
///   z = implicit_reward_diff - (g(s_w) - g(s_l)).
double sdpo_logit(const PairLogps& p, const LossConfig& cfg) noexcept;

/// -ln sigma(z), computed as softplus(-z).
double sdpo_loss(const PairLogps& p, const LossConfig& cfg) noexcept;

/// -ln sigma(implicit_reward_diff); the margin-free baseline.
double dpo_loss(const PairLogps& p, double beta) noexcept;

/// dL/dlogp_w_policy = -beta * (1 - sigma(z)), dL/dlogp_l_policy = +beta *
/// (1 - sigma(z)). Reference log-probabilities are constants.
LogpGrad sdpo_grad_logps(const PairLogps& p, const LossConfig& cfg) noexcept;

struct BatchLoss {
  double mean_loss = 0.0;
  std::vector<double> per_pair;
};

/// Mean over pairs, summed in index order. Throws Error{invalid_argument} on
/// an empty batch.
BatchLoss batch_loss(std::span<const PairLogps> pairs, const LossConfig& cfg);

}  // namespace uvcot::loss
