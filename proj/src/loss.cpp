// SPDX-License-Identifier: Apache-2.0
#include "uvcot/loss.hpp"

#include <cmath>

#include "uvcot/error.hpp"
#include "uvcot/prefmath.hpp"

namespace uvcot::loss {

void LossConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw Error(ErrorKind::config, "beta must be > 0", "loss.beta");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw Error(ErrorKind::config, "gamma must be >= 0", "loss.gamma");
  if (!(g_scale >= 0.0) || !std::isfinite(g_scale))
    throw Error(ErrorKind::config, "g_scale must be >= 0", "loss.g_scale");
  if (!(min_margin >= 0.0) || !std::isfinite(min_margin))
    throw Error(ErrorKind::config, "min_margin must be >= 0", "loss.min_margin");
}

double g_map(double s, const LossConfig& cfg) noexcept {
  switch (cfg.g_kind) {
    case GKind::affine: return cfg.g_scale * s;
  }
  return cfg.g_scale * s;
}

double score_margin(const PairLogps& p, const LossConfig& cfg) noexcept {
  return g_map(p.s_w, cfg) - g_map(p.s_l, cfg);
}

double implicit_reward_diff(const PairLogps& p, double beta) noexcept {
  const double ratio_w = p.logp_w_policy - p.logp_w_ref;
  const double ratio_l = p.logp_l_policy - p.logp_l_ref;
  return beta * (ratio_w - ratio_l);
}

double sdpo_logit(const PairLogps& p, const LossConfig& cfg) noexcept {
  return implicit_reward_diff(p, cfg.beta) - score_margin(p, cfg);
}

double sdpo_loss(const PairLogps& p, const LossConfig& cfg) noexcept {
  return prefmath::softplus(-sdpo_logit(p, cfg));
}

double dpo_loss(const PairLogps& p, double beta) noexcept {
  return prefmath::softplus(-implicit_reward_diff(p, beta));
}

LogpGrad sdpo_grad_logps(const PairLogps& p, const LossConfig& cfg) noexcept {
  // 1 - sigma(z) == sigma(-z), which stays accurate when sigma(z) ~ 1.
  const double slack = prefmath::sigmoid(-sdpo_logit(p, cfg));
  return LogpGrad{-cfg.beta * slack, cfg.beta * slack};
}

BatchLoss batch_loss(std::span<const PairLogps> pairs, const LossConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorKind::invalid_argument, "batch_loss on empty batch");
  BatchLoss out;
  out.per_pair.reserve(pairs.size());
  double sum = 0.0;
  for (const auto& p : pairs) {
    const double l = sdpo_loss(p, cfg);
    out.per_pair.push_back(l);
    sum += l;
  }
  out.mean_loss = sum / static_cast<double>(pairs.size());
  return out;
}

}  // namespace uvcot::loss
