// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>

#include "doctest.h"
#include "oracles.hpp"
#include "uvcot/error.hpp"
#include "uvcot/prefmath.hpp"

using namespace uvcot;
using namespace uvcot::prefmath;

TEST_CASE("sigmoid values and symmetry") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1.0) == doctest::Approx(oracle::kSigmoid1).epsilon(1e-15));
  CHECK(sigmoid(2.0) == doctest::Approx(oracle::kSigmoid2).epsilon(1e-15));
  for (double x : {0.1, 3.0, 40.0}) CHECK(std::abs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-15);
  for (double x : {-700.0, -30.0, 30.0, 700.0}) {
    CHECK(std::isfinite(sigmoid(x)));
    CHECK(std::isfinite(log_sigmoid(x)));
    CHECK(std::isfinite(softplus(x)));
  }
  CHECK(log_sigmoid(-700.0) == doctest::Approx(-700.0));
  CHECK(softplus(-1.0) == doctest::Approx(oracle::kNegLogSigmoid1).epsilon(1e-15));
}

TEST_CASE("Bradley-Terry preference") {
  CHECK(bt_preference_prob(0.7, 0.7) == 0.5);
  CHECK(bt_preference_prob(2.0, 0.0) == doctest::Approx(oracle::kSigmoid2).epsilon(1e-15));
  CHECK(bt_preference_prob(1.3, -0.4) + bt_preference_prob(-0.4, 1.3) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("shifted preference probability") {
  CHECK(shifted_preference_prob(0.3, 0.3, 0.0) == 0.5);
  CHECK(shifted_preference_prob(1.0, 0.0, 1.0) == 0.5);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-10, 10), b = rng.uniform(-10, 10);
    const double s = shifted_preference_prob(a, b, 0.0);
    const double bt = bt_preference_prob(a, b);
    CHECK(std::memcmp(&s, &bt, sizeof s) == 0);
  }
  // Strictly decreasing in the margin, increasing in the reward gap.
  double prev = 2.0;
  for (int i = -20; i <= 20; ++i) {
    const double p = shifted_preference_prob(0.5, 0.0, i * 0.25);
    CHECK(p < prev);
    prev = p;
  }
  prev = -1.0;
  for (int i = -20; i <= 20; ++i) {
    const double p = shifted_preference_prob(i * 0.25, 0.0, 0.5);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("gumbel sampling") {
  Rng a(11), b(11);
  CHECK(gumbel_sample({0.0}, a) == gumbel_sample({0.0}, b));

  Rng c(12), d(12);
  for (int i = 0; i < 100; ++i) {
    const double shifted = gumbel_sample({2.5}, c);
    const double base = gumbel_sample({0.0}, d);
    CHECK(shifted == doctest::Approx(base + 2.5).epsilon(1e-14));
  }

  Rng rng(13);
  const int n = 1'000'000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = gumbel_sample({0.0}, rng);
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - oracle::kEulerGamma) < 3 * se);
}

TEST_CASE("monte-carlo preference oracle") {
  Rng rng(14);
  const auto sym = mc_preference_prob(0.0, 0.0, 0.0, 1'000'000, rng);
  CHECK(sym.n_samples == 1'000'000);
  CHECK(std::abs(sym.estimate - 0.5) < 3 * sym.std_err);

  const auto off = mc_preference_prob(1.3, -0.2, 0.4, 1'000'000, rng);
  CHECK(std::abs(off.estimate - oracle::kSigmoid1p1) < 3 * off.std_err);
  CHECK(off.std_err == doctest::Approx(std::sqrt(off.estimate * (1 - off.estimate) / 1e6)));

  CHECK_THROWS_AS(mc_preference_prob(0, 0, 0, 999, rng), Error);
}
