#include <doctest.h>

#include <cmath>
#include <numbers>

#include "knockoffs/errors.hpp"
#include "knockoffs/schedule.hpp"

using namespace knockoffs;

TEST_CASE("cosine schedule endpoints and monotonicity") {
  const NoiseSchedule s = build_cosine_schedule(1000, 0.008);
  CHECK(s.alpha_bar[0] == 1.0);
  // cos(pi/2)^2 vanishes at the far end before any clamping.
  CHECK(s.alpha_bar_raw(1000) <= 1e-6);
  for (std::int64_t t = 1; t <= 1000; ++t) {
    CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
    CHECK(s.alpha_bar[t] > 0.0);
    CHECK(s.alpha_bar[t] < 1.0);
    CHECK(s.beta[t] > 0.0);
    CHECK(s.beta[t] <= kBetaClamp);
    CHECK(s.alpha[t] == 1.0 - s.beta[t]);
    if (t >= 2) CHECK(s.snr(t) < s.snr(t - 1));
  }
}

TEST_CASE("cosine schedule midpoint value") {
  // Direct evaluation of the cosine law, written out independently of the
  // implementation: f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2).
  auto f = [](double t, double T, double s) {
    const double c = std::cos((t / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  const double expected = f(500, 1000, 0.008) / f(0, 1000, 0.008);
  CHECK(expected == doctest::Approx(0.494).epsilon(0.004));

  const NoiseSchedule s = build_cosine_schedule(1000, 0.008);
  CHECK(s.alpha_bar_raw(500) == doctest::Approx(expected).epsilon(1e-12));
  // The clamp only bites in the final steps, so the cumulative value still
  // tracks the law at the midpoint.
  CHECK(s.alpha_bar[500] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("schedule rejects bad arguments") {
  CHECK_THROWS_AS(build_cosine_schedule(0, 0.008), ConfigError);
  CHECK_THROWS_AS(build_cosine_schedule(-5, 0.008), ConfigError);
  CHECK_THROWS_AS(build_cosine_schedule(100, 0.0), ConfigError);
  CHECK_THROWS_AS(build_cosine_schedule(100, -1.0), ConfigError);
}

TEST_CASE("posterior variance is zero at t=1 and positive beyond") {
  const NoiseSchedule s = build_cosine_schedule(100, 0.008);
  CHECK(s.posterior_variance(1) == 0.0);
  for (std::int64_t t = 2; t <= 100; ++t) {
    CHECK(s.posterior_variance(t) > 0.0);
    CHECK(s.posterior_variance(t) <= s.beta[t]);
  }
}

TEST_CASE("schedule hash distinguishes parameterizations") {
  const NoiseSchedule a = build_cosine_schedule(100, 0.008);
  const NoiseSchedule b = build_cosine_schedule(100, 0.008);
  const NoiseSchedule c = build_cosine_schedule(101, 0.008);
  const NoiseSchedule d = build_cosine_schedule(100, 0.009);
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash() != d.hash());
}
