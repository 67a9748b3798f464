// SPDX-License-Identifier: Apache-2.0
#include "uvcot/prefmath.hpp"

#include <cmath>
#include <string>

#include "uvcot/error.hpp"

namespace uvcot::prefmath {

double sigmoid(double x) noexcept {
  // exp() only ever sees a non-positive argument.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  // max(x,0) + log1p(exp(-|x|))
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double log_sigmoid(double x) noexcept { return -softplus(-x); }

double bt_preference_prob(double r_w, double r_l) noexcept {
  return shifted_preference_prob(r_w, r_l, 0.0);
}

double shifted_preference_prob(double r_w, double r_l, double delta_r) noexcept {
  return sigmoid(r_w - r_l - delta_r);
}

double gumbel_sample(const GumbelParams& params, Rng& rng) {
  const double u = rng.uniform_open();
  return params.location - GumbelParams::scale * std::log(-std::log(u));
}

McEstimate mc_preference_prob(double r_w, double r_l, double delta_r,
                              std::int64_t n_samples, Rng& rng) {
  if (n_samples < 1000) {
    throw Error(ErrorKind::invalid_argument,
                "n_samples must be >= 1000, got " + std::to_string(n_samples), "n_samples");
  }
  const GumbelParams winner{r_w};
  const GumbelParams loser{r_l};
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const double a = gumbel_sample(winner, rng);
    const double b = gumbel_sample(loser, rng);
    if (a - b > delta_r) ++hits;
  }
  const double n = static_cast<double>(n_samples);
  const double p = static_cast<double>(hits) / n;
  return McEstimate{p, std::sqrt(p * (1.0 - p) / n), n_samples};
}

}  // namespace uvcot::prefmath
