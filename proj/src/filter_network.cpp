#include "knockoffs/filter_network.hpp"

#include <cmath>
#include <numeric>

#include "knockoffs/errors.hpp"
#include "knockoffs/layers.hpp"

namespace knockoffs {

FilterNetwork::FilterNetwork(std::int64_t features,
                             const FilterNetworkConfig& cfg, RngStream init)
    : features_(features), cfg_(cfg) {
  if (features < 1) throw ConfigError("filter network needs features");

  // Near-one symmetric start so early training treats a feature and its
  // knockoff alike.
  Tensor z0 = Tensor::zeros({features}), zk0 = Tensor::zeros({features});
  for (std::int64_t j = 0; j < features; ++j) {
    z0.mutable_data()[static_cast<std::size_t>(j)] = init.uniform(0.9, 1.1);
    zk0.mutable_data()[static_cast<std::size_t>(j)] = init.uniform(0.9, 1.1);
  }
  z_ = make_leaf(std::move(z0));
  zk_ = make_leaf(std::move(zk0));
  params_ = {{"filter_z", z_}, {"filter_zk", zk_}};

  std::int64_t in = features;
  for (std::size_t l = 0; l < cfg.hidden.size() + 1; ++l) {
    const std::int64_t out =
        l < cfg.hidden.size() ? cfg.hidden[l] : 1;
    const double sd = std::sqrt(2.0 / static_cast<double>(in));
    Var w = make_leaf(Tensor::randn({in, out}, init, sd));
    Var b = make_leaf(Tensor::zeros({out}));
    weights_.push_back(w);
    biases_.push_back(b);
    params_.push_back({"w" + std::to_string(l), w});
    params_.push_back({"b" + std::to_string(l), b});
    in = out;
  }
}

Var FilterNetwork::forward(const Var& x, const Var& xk, bool train,
                           RngStream* dropout_rng) const {
  Var h = pairwise_filter(x, xk, z_, zk_);
  const std::size_t n_hidden = cfg_.hidden.size();
  for (std::size_t l = 0; l < n_hidden; ++l) {
    h = relu(linear(layer_norm_rows(h, kNormEps), weights_[l], biases_[l]));
    if (train && cfg_.dropout > 0.0) {
      if (dropout_rng == nullptr)
        throw std::invalid_argument("training forward needs a dropout rng");
      h = dropout(h, cfg_.dropout, *dropout_rng, true);
    }
  }
  return linear(h, weights_[n_hidden], biases_[n_hidden]);
}

std::vector<Tensor> FilterNetwork::linear_weights() const {
  std::vector<Tensor> w;
  w.reserve(weights_.size());
  for (const Var& v : weights_) w.push_back(v.value());
  return w;
}

FilterTrainResult train_filter_network(const Tensor& x, const Tensor& xk,
                                       const std::vector<double>& y,
                                       const FilterNetworkConfig& cfg) {
  if (!x.same_shape(xk))
    throw DataError("train_filter_network: X and knockoffs differ in shape");
  const std::int64_t n = x.rows(), p = x.cols();
  if (static_cast<std::int64_t>(y.size()) != n)
    throw DataError("train_filter_network: response length mismatch");

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  bool binary = true;
  for (double v : y) {
    var += (v - mean) * (v - mean);
    if (v != 0.0 && v != 1.0) binary = false;
  }
  var /= static_cast<double>(n);
  if (cfg.loss == LossKind::kSquaredError && var == 0.0)
    throw DataError("train_filter_network: response has zero variance");
  if (cfg.loss == LossKind::kBinaryCrossEntropy && !binary)
    throw DataError("train_filter_network: cross-entropy needs {0,1} labels");

  RngStream master(cfg.seed);
  FilterTrainResult result;
  result.net = FilterNetwork(p, cfg, master.derive("init"));

  AdamW opt({.lr = cfg.lr});
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle = master.derive("shuffle", static_cast<std::uint64_t>(epoch));
    RngStream drop = master.derive("dropout", static_cast<std::uint64_t>(epoch));
    for (std::int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[shuffle.below(static_cast<std::uint64_t>(i + 1))]);

    double epoch_loss = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
      const std::int64_t B = std::min(cfg.batch_size, n - start);
      Tensor bx = Tensor::zeros({B, p}), bk = Tensor::zeros({B, p});
      Tensor by = Tensor::zeros({B, 1});
      for (std::int64_t b = 0; b < B; ++b) {
        const std::int64_t row = order[static_cast<std::size_t>(start + b)];
        for (std::int64_t j = 0; j < p; ++j) {
          bx.mutable_data()[static_cast<std::size_t>(b * p + j)] = x.at(row, j);
          bk.mutable_data()[static_cast<std::size_t>(b * p + j)] = xk.at(row, j);
        }
        by.mutable_data()[static_cast<std::size_t>(b)] = y[static_cast<std::size_t>(row)];
      }
      Var pred = result.net.forward(make_const(bx), make_const(bk), true, &drop);
      Var loss = cfg.loss == LossKind::kSquaredError
                     ? mse_loss(pred, by)
                     : bce_logits_loss(pred, by, true);
      const double loss_value = loss.value()[0];
      if (!std::isfinite(loss_value))
        throw NumericalError("train_filter_network: non-finite loss at epoch " +
                             std::to_string(epoch));
      backward(loss);
      opt.step(result.net.params());
      epoch_loss += loss_value;
      ++batches;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

std::vector<double> predict(const FilterNetwork& net, const Tensor& x,
                            const Tensor& xk) {
  NoGradGuard no_grad;
  Var out = net.forward(make_const(x), make_const(xk));
  std::vector<double> result(static_cast<std::size_t>(out.value().size()));
  for (std::size_t i = 0; i < result.size(); ++i) {
    double v = out.value()[static_cast<std::int64_t>(i)];
    if (net.loss_kind() == LossKind::kBinaryCrossEntropy)
      v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                   : std::exp(v) / (1.0 + std::exp(v));
    result[i] = v;
  }
  return result;
}

double filter_forward(const FilterNetwork& net, const Tensor& x_row,
                      const Tensor& xk_row) {
  if (x_row.size() != net.features() || xk_row.size() != net.features())
    throw DataError("filter_forward: row length mismatch");
  Tensor x = x_row.reshaped({1, net.features()});
  Tensor xk = xk_row.reshaped({1, net.features()});
  return predict(net, x, xk)[0];
}

}  // namespace knockoffs
