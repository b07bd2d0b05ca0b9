#pragma once

#include "knockoffs/optimizer.hpp"
#include "knockoffs/rng.hpp"

namespace knockoffs {

enum class LossKind { kSquaredError, kBinaryCrossEntropy };

struct FilterNetworkConfig {
  std::vector<std::int64_t> hidden = {50, 20};
  double dropout = 0.1;
  LossKind loss = LossKind::kSquaredError;
  std::int64_t epochs = 1000;
  std::int64_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

// Network over augmented features [X, Xk]: a pairwise filter layer with one
// weight pair (z_j, zk_j) per feature, then an MLP whose hidden layers apply
// layer norm -> linear -> relu -> dropout, then a scalar linear head. For
// regression the head output is the prediction; for binary responses it is
// a logit.
class FilterNetwork {
 public:
  FilterNetwork() = default;
  FilterNetwork(std::int64_t features, const FilterNetworkConfig& cfg,
                RngStream init);

  // x, xk are (n, p) leaves or constants; returns (n, 1) predictions.
  Var forward(const Var& x, const Var& xk, bool train = false,
              RngStream* dropout_rng = nullptr) const;

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::int64_t features() const { return features_; }
  LossKind loss_kind() const { return cfg_.loss; }
  const FilterNetworkConfig& config() const { return cfg_; }

  const Var& filter_z() const { return z_; }
  const Var& filter_zk() const { return zk_; }
  // Linear-layer weights input-to-output, for the effective-weight product.
  std::vector<Tensor> linear_weights() const;

  std::uint64_t param_hash() const { return params_hash(params_); }

 private:
  std::int64_t features_ = 0;
  FilterNetworkConfig cfg_;
  Var z_, zk_;
  std::vector<Var> weights_, biases_;  // hidden layers then head
  std::vector<Param> params_;
};

struct FilterTrainResult {
  FilterNetwork net;
  std::vector<double> epoch_loss;
};

// Supervised training on the augmented matrix. Binary responses must be
// {0,1}; constant responses are rejected for squared-error loss.
FilterTrainResult train_filter_network(const Tensor& x, const Tensor& xk,
                                       const std::vector<double>& y,
                                       const FilterNetworkConfig& cfg);

// Single-row prediction in eval mode (logistic link applied for BCE nets).
double filter_forward(const FilterNetwork& net, const Tensor& x_row,
                      const Tensor& xk_row);

// Batch predictions in eval mode (link applied for BCE nets).
std::vector<double> predict(const FilterNetwork& net, const Tensor& x,
                            const Tensor& xk);

}  // namespace knockoffs
