#pragma once

#include "knockoffs/diffusion.hpp"
#include "knockoffs/optimizer.hpp"

namespace knockoffs {

// Autoencoder knockoff generator used as the comparison baseline: a linear
// encoder/decoder pair around a small bottleneck with ELU on the code.
struct AutoencoderConfig {
  std::int64_t bottleneck = 3;
  std::int64_t epochs = 300;
  std::int64_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

class AutoencoderModel {
 public:
  AutoencoderModel() = default;
  AutoencoderModel(std::int64_t features, std::int64_t bottleneck,
                   RngStream init);

  Var reconstruct(const Tensor& x) const;  // (n, p) -> (n, p)

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::int64_t features() const { return features_; }
  std::int64_t bottleneck() const { return bottleneck_; }
  std::uint64_t param_hash() const { return params_hash(params_); }

 private:
  std::int64_t features_ = 0, bottleneck_ = 0;
  Var enc_w_, enc_b_, dec_w_, dec_b_;
  std::vector<Param> params_;
};

struct AutoencoderTrainResult {
  AutoencoderModel model;
  std::vector<double> epoch_loss;
};

AutoencoderTrainResult train_autoencoder(const Tensor& data,
                                         const AutoencoderConfig& cfg);

// Knockoffs as reconstruction plus row-permuted residuals, marginal-matched
// against the data. This fixes the construction the baseline lineage leaves
// implicit; the permutation stream derives from (seed, "residual-perm").
KnockoffMatrix generate_ae_knockoffs(const AutoencoderModel& model,
                                     const Tensor& data, std::uint64_t seed);

}  // namespace knockoffs
