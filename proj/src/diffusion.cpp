#include "knockoffs/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knockoffs/errors.hpp"
#include "knockoffs/parallel.hpp"

namespace knockoffs {

DiffusionTrainConfig DiffusionTrainConfig::desk_scale() {
  DiffusionTrainConfig cfg;
  cfg.epochs = 150;
  cfg.timesteps = 250;
  cfg.layers = 3;
  cfg.width = 64;
  cfg.heads = 4;
  cfg.lr = 1e-3;  // the small model tolerates a faster schedule
  return cfg;
}

Tensor forward_noise(const Tensor& x0, std::int64_t t, const Tensor& eps,
                     const NoiseSchedule& sched) {
  if (!x0.same_shape(eps))
    throw DataError("forward_noise: noise shape must match data");
  if (t < 1 || t > sched.timesteps)
    throw ConfigError("forward_noise: timestep out of range");
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  Tensor out = Tensor::zeros(x0.shape());
  auto o = out.mutable_data();
  auto x = x0.data();
  auto e = eps.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * x[i] + b * e[i];
  return out;
}

Tensor reverse_mean(const Tensor& x_t, const Tensor& eps_hat,
                    const NoiseSchedule& sched, std::int64_t t) {
  if (t < 1 || t > sched.timesteps)
    throw ConfigError("reverse_mean: timestep out of range");
  const auto i = static_cast<std::size_t>(t);
  const double coef = sched.beta[i] / std::sqrt(1.0 - sched.alpha_bar[i]);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha[i]);
  Tensor out = Tensor::zeros(x_t.shape());
  auto o = out.mutable_data();
  auto x = x_t.data();
  auto e = eps_hat.data();
  for (std::size_t k = 0; k < o.size(); ++k)
    o[k] = inv_sqrt_alpha * (x[k] - coef * e[k]);
  return out;
}

DenoiserTrainResult train_denoiser(
    const Tensor& data, const DiffusionTrainConfig& cfg,
    const std::function<void(std::int64_t, double)>& on_epoch) {
  if (!data.defined() || data.rows() == 0 || data.cols() == 0)
    throw DataError("train_denoiser: empty data");
  const std::int64_t n = data.rows(), p = data.cols();

  DenoiserTrainResult result;
  result.schedule = build_cosine_schedule(cfg.timesteps, cfg.schedule_offset);

  RngStream master(cfg.seed);
  DenoiserArch arch{.features = p,
                    .layers = cfg.layers,
                    .width = cfg.width,
                    .heads = cfg.heads,
                    .ffn_mult = cfg.ffn_mult};
  result.model = DenoiserModel(arch, master.derive("init"));

  AdamW opt({.lr = cfg.lr,
             .weight_decay = cfg.weight_decay,
             .clip_norm = cfg.clip_norm});

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.anneal_lr) opt.set_lr(cosine_lr(cfg.lr, epoch, cfg.epochs));

    RngStream shuffle = master.derive("shuffle", static_cast<std::uint64_t>(epoch));
    for (std::int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[shuffle.below(static_cast<std::uint64_t>(i + 1))]);

    double epoch_loss = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
      const std::int64_t B = std::min(cfg.batch_size, n - start);
      RngStream noise = master.derive("noise", static_cast<std::uint64_t>(epoch),
                                      static_cast<std::uint64_t>(batches));
      Tensor x_t = Tensor::zeros({B, p});
      Tensor target = Tensor::zeros({B, p});
      std::vector<std::int64_t> ts(static_cast<std::size_t>(B));
      auto xt = x_t.mutable_data();
      auto tg = target.mutable_data();
      auto src = data.data();
      for (std::int64_t b = 0; b < B; ++b) {
        const std::int64_t row = order[static_cast<std::size_t>(start + b)];
        const std::int64_t t =
            1 + static_cast<std::int64_t>(noise.below(
                    static_cast<std::uint64_t>(cfg.timesteps)));
        ts[static_cast<std::size_t>(b)] = t;
        const double ab = result.schedule.alpha_bar[static_cast<std::size_t>(t)];
        const double ca = std::sqrt(ab), cb = std::sqrt(1.0 - ab);
        for (std::int64_t j = 0; j < p; ++j) {
          const double eps = noise.normal();
          const auto dst = static_cast<std::size_t>(b * p + j);
          tg[dst] = eps;
          xt[dst] = ca * src[static_cast<std::size_t>(row * p + j)] + cb * eps;
        }
      }

      Var pred = result.model.forward(x_t, ts);
      Var loss = mse_loss(pred, target);
      const double loss_value = loss.value()[0];
      if (!std::isfinite(loss_value))
        throw NumericalError("train_denoiser: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batches));
      backward(loss);
      opt.step(result.model.params());
      epoch_loss += loss_value;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    result.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

namespace {
constexpr std::int64_t kSampleBlockRows = 128;
}

Tensor sample_knockoffs_raw(const DenoiserModel& model,
                            const NoiseSchedule& sched, std::int64_t n,
                            std::uint64_t seed, int workers) {
  if (n < 1) throw ConfigError("sample_knockoffs_raw: n must be >= 1");
  const std::int64_t p = model.arch().features;
  Tensor out = Tensor::zeros({n, p});
  RngStream master(seed);
  const std::int64_t blocks = (n + kSampleBlockRows - 1) / kSampleBlockRows;

  parallel_for(blocks, resolve_workers(workers), [&](std::int64_t blk) {
    NoGradGuard no_grad;
    const std::int64_t row0 = blk * kSampleBlockRows;
    const std::int64_t rows = std::min(kSampleBlockRows, n - row0);
    RngStream rng = master.derive("sampling", static_cast<std::uint64_t>(blk));

    Tensor x = Tensor::randn({rows, p}, rng);
    std::vector<std::int64_t> ts(static_cast<std::size_t>(rows));
    for (std::int64_t t = sched.timesteps; t >= 1; --t) {
      std::fill(ts.begin(), ts.end(), t);
      Tensor eps_hat = model.forward(x, ts).value();
      Tensor mu = reverse_mean(x, eps_hat, sched, t);
      if (t > 1) {
        const double sigma = std::sqrt(sched.posterior_variance(t));
        auto m = mu.mutable_data();
        for (std::size_t i = 0; i < m.size(); ++i)
          m[i] += sigma * rng.normal();
      }
      if (!mu.all_finite())
        throw NumericalError(
            "sample_knockoffs_raw: non-finite state at timestep " +
            std::to_string(t));
      x = std::move(mu);
    }
    auto dst = out.mutable_data();
    auto src = x.data();
    std::copy(src.begin(), src.end(),
              dst.begin() + static_cast<std::ptrdiff_t>(row0 * p));
  });
  return out;
}

KnockoffMatrix match_marginals(const Tensor& original, const Tensor& raw) {
  if (!original.same_shape(raw))
    throw DataError("match_marginals: shape mismatch");
  const std::int64_t n = original.rows(), p = original.cols();
  KnockoffMatrix result;
  result.values = Tensor::zeros({n, p});
  result.provenance = KnockoffMatrix::Provenance::kMarginalMatched;

  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::vector<double> sorted(static_cast<std::size_t>(n));
  auto out = result.values.mutable_data();
  for (std::int64_t j = 0; j < p; ++j) {
    for (std::int64_t i = 0; i < n; ++i) {
      idx[static_cast<std::size_t>(i)] = i;
      sorted[static_cast<std::size_t>(i)] = original.at(i, j);
    }
    std::sort(sorted.begin(), sorted.end());
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::int64_t a, std::int64_t b) {
                       return raw.at(a, j) < raw.at(b, j);
                     });
    // Row holding the k-th smallest raw value receives the k-th order
    // statistic of the original column.
    for (std::int64_t k = 0; k < n; ++k)
      out[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)] * p + j)] =
          sorted[static_cast<std::size_t>(k)];
  }
  return result;
}

KnockoffMatrix generate_knockoffs(const DenoiserModel& model,
                                  const NoiseSchedule& sched,
                                  const Tensor& data, std::uint64_t seed,
                                  int workers) {
  Tensor raw = sample_knockoffs_raw(model, sched, data.rows(), seed, workers);
  KnockoffMatrix ko = match_marginals(data, raw);
  ko.fingerprint = {sched.hash(), seed, model.param_hash()};
  return ko;
}

}  // namespace knockoffs
