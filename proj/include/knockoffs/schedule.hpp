#pragma once

#include <cstdint>
#include <vector>

namespace knockoffs {

// Cosine noise schedule. Arrays are indexed by timestep t = 1..T with a
// t = 0 reference slot (alpha_bar[0] = 1, beta[0] = alpha[0] unused).
struct NoiseSchedule {
  std::int64_t timesteps = 0;  // T
  double offset = 0.0;         // s
  std::vector<double> beta;
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // cumulative product of alpha

  // alpha_bar / (1 - alpha_bar); strictly decreasing in t.
  double snr(std::int64_t t) const;
  // The cosine-law value f(t)/f(0) before the beta clamp touches it.
  double alpha_bar_raw(std::int64_t t) const;
  // Posterior variance of the reverse step (0 at t = 1).
  double posterior_variance(std::int64_t t) const;

  std::uint64_t hash() const;  // fingerprint for provenance records
};

// T >= 1 timesteps, offset s > 0. beta is clamped into (0, kBetaClamp];
// without the cap the final step divides by sqrt(1 - beta_T) ~ 31x and
// amplifies denoiser error into divergence at small T.
NoiseSchedule build_cosine_schedule(std::int64_t timesteps, double offset);

constexpr double kScheduleOffsetDefault = 0.008;
constexpr double kBetaClamp = 0.9;

}  // namespace knockoffs
