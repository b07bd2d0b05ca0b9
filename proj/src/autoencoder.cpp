#include "knockoffs/autoencoder.hpp"

#include <cmath>
#include <numeric>

#include "knockoffs/errors.hpp"
#include "knockoffs/layers.hpp"

namespace knockoffs {

AutoencoderModel::AutoencoderModel(std::int64_t features,
                                   std::int64_t bottleneck, RngStream init)
    : features_(features), bottleneck_(bottleneck) {
  if (features < 1 || bottleneck < 1)
    throw ConfigError("invalid autoencoder architecture");
  const double s_enc = 1.0 / std::sqrt(static_cast<double>(features));
  const double s_dec = 1.0 / std::sqrt(static_cast<double>(bottleneck));
  enc_w_ = make_leaf(Tensor::randn({features, bottleneck}, init, s_enc));
  enc_b_ = make_leaf(Tensor::zeros({bottleneck}));
  dec_w_ = make_leaf(Tensor::randn({bottleneck, features}, init, s_dec));
  dec_b_ = make_leaf(Tensor::zeros({features}));
  params_ = {{"enc_w", enc_w_},
             {"enc_b", enc_b_},
             {"dec_w", dec_w_},
             {"dec_b", dec_b_}};
}

Var AutoencoderModel::reconstruct(const Tensor& x) const {
  if (x.cols() != features_)
    throw DataError("autoencoder: input width does not match architecture");
  Var code = elu(linear(make_const(x), enc_w_, enc_b_));
  return linear(code, dec_w_, dec_b_);
}

AutoencoderTrainResult train_autoencoder(const Tensor& data,
                                         const AutoencoderConfig& cfg) {
  if (!data.defined() || data.rows() == 0 || data.cols() == 0)
    throw DataError("train_autoencoder: empty data");
  const std::int64_t n = data.rows(), p = data.cols();

  RngStream master(cfg.seed);
  AutoencoderTrainResult result;
  result.model = AutoencoderModel(p, cfg.bottleneck, master.derive("init"));
  AdamW opt({.lr = cfg.lr});

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle = master.derive("shuffle", static_cast<std::uint64_t>(epoch));
    for (std::int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[shuffle.below(static_cast<std::uint64_t>(i + 1))]);

    double epoch_loss = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
      const std::int64_t B = std::min(cfg.batch_size, n - start);
      Tensor batch = Tensor::zeros({B, p});
      auto bd = batch.mutable_data();
      auto src = data.data();
      for (std::int64_t b = 0; b < B; ++b) {
        const std::int64_t row = order[static_cast<std::size_t>(start + b)];
        for (std::int64_t j = 0; j < p; ++j)
          bd[static_cast<std::size_t>(b * p + j)] =
              src[static_cast<std::size_t>(row * p + j)];
      }
      Var loss = mse_loss(result.model.reconstruct(batch), batch);
      const double loss_value = loss.value()[0];
      if (!std::isfinite(loss_value))
        throw NumericalError("train_autoencoder: non-finite loss at epoch " +
                             std::to_string(epoch));
      backward(loss);
      opt.step(result.model.params());
      epoch_loss += loss_value;
      ++batches;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

KnockoffMatrix generate_ae_knockoffs(const AutoencoderModel& model,
                                     const Tensor& data, std::uint64_t seed) {
  NoGradGuard no_grad;
  const std::int64_t n = data.rows(), p = data.cols();
  Tensor recon = model.reconstruct(data).value();

  RngStream perm_rng = RngStream(seed).derive("residual-perm");
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::int64_t i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[perm_rng.below(static_cast<std::uint64_t>(i + 1))]);

  Tensor raw = Tensor::zeros({n, p});
  auto rd = raw.mutable_data();
  auto xd = data.data();
  auto cd = recon.data();
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t src = perm[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < p; ++j) {
      const auto dst_idx = static_cast<std::size_t>(i * p + j);
      const auto res_idx = static_cast<std::size_t>(src * p + j);
      rd[dst_idx] = cd[dst_idx] + (xd[res_idx] - cd[res_idx]);
    }
  }
  KnockoffMatrix ko = match_marginals(data, raw);
  ko.fingerprint = {0, seed, model.param_hash()};
  return ko;
}

}  // namespace knockoffs
