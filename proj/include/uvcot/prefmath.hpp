// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "uvcot/rng.hpp"

namespace uvcot::prefmath {

/// Gumbel(location, 1). The scale is fixed at 1 so that the difference of two
/// such variables is exactly logistic.
struct GumbelParams {
  double location = 0.0;
  static constexpr double scale = 1.0;
};

/// 1 / (1 + exp(-x)) evaluated without overflow for any finite x.
double sigmoid(double x) noexcept;

/// ln sigma(x), stable for large |x|.
double log_sigmoid(double x) noexcept;

/// softplus(x) = ln(1 + exp(x)); note -ln sigma(z) = softplus(-z).
double softplus(double x) noexcept;

/// Bradley-Terry probability that the winner is preferred: sigma(r_w - r_l).
double bt_preference_prob(double r_w, double r_l) noexcept;

/// location - ln(-ln U), U uniform on (0,1) with both endpoints excluded.
double gumbel_sample(const GumbelParams& params, Rng& rng);

/// P(R_w - R_l > delta_r) for R_w ~ Gumbel(r_w,1), R_l ~ Gumbel(r_l,1), which
/// equals sigma(r_w - r_l - delta_r). With delta_r == 0 this is bitwise the
/// Bradley-Terry probability.
double shifted_preference_prob(double r_w, double r_l, double delta_r) noexcept;

struct McEstimate {
  double estimate = 0.0;
  double std_err = 0.0;
  std::int64_t n_samples = 0;
};

/// Brute-force estimate of P(R_w - R_l > delta_r) by drawing both Gumbel
/// variables. Independent of the closed form above; used to check it.
/// Requires n_samples >= 1000.
McEstimate mc_preference_prob(double r_w, double r_l, double delta_r,
                              std::int64_t n_samples, Rng& rng);

}  // namespace uvcot::prefmath
