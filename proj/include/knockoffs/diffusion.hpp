#pragma once

#include <functional>

#include "knockoffs/denoiser.hpp"
#include "knockoffs/matrix_io.hpp"
#include "knockoffs/schedule.hpp"

namespace knockoffs {

struct DiffusionTrainConfig {
  std::int64_t epochs = 300;
  std::int64_t batch_size = 64;
  std::int64_t timesteps = 1000;
  double schedule_offset = kScheduleOffsetDefault;
  std::int64_t layers = 6;
  std::int64_t width = 256;
  std::int64_t heads = 8;
  std::int64_t ffn_mult = 2;
  double lr = 1e-4;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  bool anneal_lr = true;  // cosine anneal to 1% over the epoch budget
  std::uint64_t seed = 0;

  // Small profile sized for laptop-class runs and the integration suite.
  static DiffusionTrainConfig desk_scale();
};

struct GeneratorFingerprint {
  std::uint64_t schedule_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t model_hash = 0;
};

struct KnockoffMatrix {
  enum class Provenance { kRawDiffusion, kMarginalMatched };
  Tensor values;
  Provenance provenance = Provenance::kRawDiffusion;
  GeneratorFingerprint fingerprint;
};

struct DenoiserTrainResult {
  DenoiserModel model;
  NoiseSchedule schedule;
  std::vector<double> epoch_loss;
};

// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps, one t for the batch.
Tensor forward_noise(const Tensor& x0, std::int64_t t, const Tensor& eps,
                     const NoiseSchedule& sched);

// Reverse-step mean of the DDPM sampler given a noise prediction.
Tensor reverse_mean(const Tensor& x_t, const Tensor& eps_hat,
                    const NoiseSchedule& sched, std::int64_t t);

// Trains the noise predictor on the marginal feature distribution. The
// response never enters this path. Loss is mean squared error per element;
// the per-epoch trace is the mean of the batch losses.
DenoiserTrainResult train_denoiser(
    const Tensor& data, const DiffusionTrainConfig& cfg,
    const std::function<void(std::int64_t, double)>& on_epoch = nullptr);

// Full reverse chain from Gaussian noise; returns n raw sample rows.
// Rows are generated in fixed-size blocks with per-block derived noise
// streams, so the result does not depend on the worker count.
Tensor sample_knockoffs_raw(const DenoiserModel& model,
                            const NoiseSchedule& sched, std::int64_t n,
                            std::uint64_t seed, int workers = 1);

// Rank-matches each raw column onto the order statistics of the original
// column. Ties in the raw ranks break by row index, so the result is a
// deterministic exact permutation of each original column.
KnockoffMatrix match_marginals(const Tensor& original, const Tensor& raw);

// Convenience: sample + match + fingerprint, one knockoff row per data row.
KnockoffMatrix generate_knockoffs(const DenoiserModel& model,
                                  const NoiseSchedule& sched,
                                  const Tensor& data, std::uint64_t seed,
                                  int workers = 1);

}  // namespace knockoffs
