#include "knockoffs/schedule.hpp"

#include <cmath>
#include <numbers>

#include "knockoffs/errors.hpp"
#include "knockoffs/rng.hpp"

namespace knockoffs {

namespace {

double cosine_law(std::int64_t t, std::int64_t T, double s) {
  const double u = (static_cast<double>(t) / static_cast<double>(T) + s) /
                   (1.0 + s);
  const double c = std::cos(u * std::numbers::pi / 2.0);
  return c * c;
}

}  // namespace

double NoiseSchedule::snr(std::int64_t t) const {
  const double ab = alpha_bar[static_cast<std::size_t>(t)];
  return ab / (1.0 - ab);
}

double NoiseSchedule::alpha_bar_raw(std::int64_t t) const {
  return cosine_law(t, timesteps, offset) / cosine_law(0, timesteps, offset);
}

double NoiseSchedule::posterior_variance(std::int64_t t) const {
  if (t <= 1) return 0.0;
  const double ab_prev = alpha_bar[static_cast<std::size_t>(t - 1)];
  const double ab = alpha_bar[static_cast<std::size_t>(t)];
  return (1.0 - ab_prev) / (1.0 - ab) * beta[static_cast<std::size_t>(t)];
}

std::uint64_t NoiseSchedule::hash() const {
  std::uint64_t h = fnv1a64(&timesteps, sizeof timesteps);
  h = fnv1a64(&offset, sizeof offset, h);
  h = fnv1a64(beta.data(), beta.size() * sizeof(double), h);
  return h;
}

NoiseSchedule build_cosine_schedule(std::int64_t timesteps, double offset) {
  if (timesteps < 1)
    throw ConfigError("noise schedule needs at least one timestep");
  if (offset <= 0.0) throw ConfigError("noise schedule offset must be > 0");

  NoiseSchedule s;
  s.timesteps = timesteps;
  s.offset = offset;
  const auto size = static_cast<std::size_t>(timesteps + 1);
  s.beta.assign(size, 0.0);
  s.alpha.assign(size, 1.0);
  s.alpha_bar.assign(size, 1.0);

  double prev_raw = 1.0;
  for (std::int64_t t = 1; t <= timesteps; ++t) {
    const double raw = s.alpha_bar_raw(t);
    double beta = 1.0 - raw / prev_raw;
    if (beta > kBetaClamp) beta = kBetaClamp;
    prev_raw = raw;
    const auto i = static_cast<std::size_t>(t);
    s.beta[i] = beta;
    s.alpha[i] = 1.0 - beta;
    s.alpha_bar[i] = s.alpha_bar[i - 1] * s.alpha[i];
  }
  return s;
}

}  // namespace knockoffs
