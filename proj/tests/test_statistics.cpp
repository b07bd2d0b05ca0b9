#include <doctest.h>

#include <cmath>

#include "knockoffs/errors.hpp"
#include "knockoffs/statistics.hpp"
#include "test_support.hpp"

using namespace knockoffs;

namespace {

Tensor randn(std::vector<std::int64_t> shape, std::uint64_t seed) {
  RngStream rng(seed);
  return Tensor::randn(std::move(shape), rng);
}

void set_param(FilterNetwork& net, const std::string& name, Tensor value) {
  for (Param& p : net.params())
    if (p.name == name) {
      p.var.set_value(std::move(value));
      return;
    }
  FAIL("no parameter named ", name);
}

// Swap feature/knockoff columns at j in-place.
void swap_columns(Tensor& x, Tensor& xk, std::int64_t j) {
  const std::int64_t n = x.rows(), p = x.cols();
  auto a = x.mutable_data();
  auto b = xk.mutable_data();
  for (std::int64_t i = 0; i < n; ++i)
    std::swap(a[static_cast<std::size_t>(i * p + j)],
              b[static_cast<std::size_t>(i * p + j)]);
}

void swap_filter_pair(FilterNetwork& net, std::int64_t j) {
  Tensor z = net.filter_z().value().clone();
  Tensor zk = net.filter_zk().value().clone();
  std::swap(z.mutable_data()[static_cast<std::size_t>(j)],
            zk.mutable_data()[static_cast<std::size_t>(j)]);
  set_param(net, "filter_z", std::move(z));
  set_param(net, "filter_zk", std::move(zk));
}

}  // namespace

TEST_CASE("planted linear signal is recovered with high R^2") {
  const std::int64_t n = 400, p = 6;
  Tensor x = randn({n, p}, 1);
  Tensor xk = randn({n, p}, 2);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = x.at(i, 0);

  FilterNetworkConfig cfg;
  cfg.epochs = 800;
  cfg.lr = 2e-3;
  cfg.seed = 9;
  FilterTrainResult r = train_filter_network(x, xk, y, cfg);

  std::vector<double> pred = predict(r.net, x, xk);
  double sse = 0.0, sst = 0.0, mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    sse += std::pow(pred[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)], 2);
    sst += std::pow(y[static_cast<std::size_t>(i)] - mean, 2);
  }
  CHECK(1.0 - sse / sst >= 0.95);
}

TEST_CASE("training is deterministic under the seed") {
  Tensor x = randn({60, 4}, 3);
  Tensor xk = randn({60, 4}, 4);
  std::vector<double> y(60);
  for (std::size_t i = 0; i < 60; ++i) y[i] = x.at(static_cast<std::int64_t>(i), 1);
  FilterNetworkConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 5;
  FilterTrainResult a = train_filter_network(x, xk, y, cfg);
  FilterTrainResult b = train_filter_network(x, xk, y, cfg);
  CHECK(a.net.param_hash() == b.net.param_hash());
  CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("binary responses use the logistic link") {
  Tensor x = randn({80, 3}, 6);
  Tensor xk = randn({80, 3}, 7);
  std::vector<double> y(80);
  for (std::size_t i = 0; i < 80; ++i)
    y[i] = x.at(static_cast<std::int64_t>(i), 0) > 0 ? 1.0 : 0.0;
  FilterNetworkConfig cfg;
  cfg.loss = LossKind::kBinaryCrossEntropy;
  cfg.epochs = 50;
  cfg.seed = 11;
  FilterTrainResult r = train_filter_network(x, xk, y, cfg);
  for (double l : r.epoch_loss) CHECK(std::isfinite(l));
  for (double prob : predict(r.net, x, xk)) {
    CHECK(prob > 0.0);
    CHECK(prob < 1.0);
  }
  // Labels outside {0,1} are rejected.
  std::vector<double> bad(y);
  bad[0] = 0.5;
  CHECK_THROWS_AS(train_filter_network(x, xk, bad, cfg), DataError);
}

TEST_CASE("constant responses are rejected for squared error") {
  Tensor x = randn({10, 2}, 8);
  Tensor xk = randn({10, 2}, 9);
  std::vector<double> y(10, 3.0);
  FilterNetworkConfig cfg;
  CHECK_THROWS_AS(train_filter_network(x, xk, y, cfg), DataError);
}

TEST_CASE("filter_forward runs single rows through the filter layer") {
  FilterNetworkConfig cfg;
  FilterNetwork net(3, cfg, RngStream(21));
  Tensor x_row = Tensor::from_data({3}, {1.0, -0.5, 2.0});
  Tensor xk_row = Tensor::from_data({3}, {0.0, 0.5, -1.0});
  const double out = filter_forward(net, x_row, xk_row);
  CHECK(std::isfinite(out));
  // Matches the batch path on a single row.
  CHECK(out == predict(net, x_row.reshaped({1, 3}), xk_row.reshaped({1, 3}))[0]);
  CHECK_THROWS_AS(filter_forward(net, Tensor::zeros({2}), xk_row), DataError);
}

TEST_CASE("equal filter weights make a feature's gradient statistic vanish") {
  const std::int64_t n = 30, p = 4;
  Tensor x = randn({n, p}, 31);
  Tensor xk = randn({n, p}, 32);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    y[static_cast<std::size_t>(i)] = x.at(i, 0) - 0.5 * x.at(i, 2);

  FilterNetworkConfig cfg;
  FilterNetwork net(p, cfg, RngStream(33));
  Tensor z = net.filter_z().value().clone();
  z.mutable_data()[1] = 0.77;
  set_param(net, "filter_z", z.clone());
  Tensor zk = net.filter_zk().value().clone();
  zk.mutable_data()[1] = 0.77;  // z_1 == zk_1
  set_param(net, "filter_zk", std::move(zk));

  KnockoffStatistics stats = gradient_statistics(net, x, xk, y);
  CHECK(stats.w[1] == 0.0);
}

TEST_CASE("gradient statistics match a finite-difference oracle") {
  const std::int64_t n = 12, p = 4;
  Tensor x = randn({n, p}, 41);
  Tensor xk = randn({n, p}, 42);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    y[static_cast<std::size_t>(i)] = x.at(i, 0) + 0.3 * x.at(i, 3);

  FilterNetworkConfig cfg;
  cfg.hidden = {8, 5};
  FilterNetwork net(p, cfg, RngStream(43));

  KnockoffStatistics stats = gradient_statistics(net, x, xk, y);

  // Total squared-error loss as a plain function of the inputs.
  auto total_loss = [&](const Tensor& xx, const Tensor& kk) {
    NoGradGuard ng;
    Var pred = net.forward(make_const(xx), make_const(kk));
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      s += std::pow(pred.value()[i] - y[static_cast<std::size_t>(i)], 2);
    return s;
  };
  const double h = 1e-6;
  for (std::int64_t j = 0; j < p; ++j) {
    double mean_x = 0.0, mean_k = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      Tensor hi = x.clone(), lo = x.clone();
      hi.mutable_data()[static_cast<std::size_t>(i * p + j)] += h;
      lo.mutable_data()[static_cast<std::size_t>(i * p + j)] -= h;
      mean_x += std::abs((total_loss(hi, xk) - total_loss(lo, xk)) / (2 * h));
      Tensor khi = xk.clone(), klo = xk.clone();
      khi.mutable_data()[static_cast<std::size_t>(i * p + j)] += h;
      klo.mutable_data()[static_cast<std::size_t>(i * p + j)] -= h;
      mean_k += std::abs((total_loss(x, khi) - total_loss(x, klo)) / (2 * h));
    }
    const double want = (mean_x - mean_k) / static_cast<double>(n);
    const double got = stats.w[static_cast<std::size_t>(j)];
    CHECK(std::abs(got - want) /
              std::max({std::abs(got), std::abs(want), 1e-6}) <
          1e-3);
  }
}

TEST_CASE("both statistics are antisymmetric under the joint swap") {
  const std::int64_t n = 40, p = 6;
  RngStream data_rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = Tensor::randn({n, p}, data_rng);
    Tensor xk = Tensor::randn({n, p}, data_rng);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
      y[static_cast<std::size_t>(i)] = x.at(i, 0) + 0.2 * x.at(i, 4);

    FilterNetworkConfig cfg;
    // Random untrained weights already satisfy the structural property.
    FilterNetwork net(p, cfg, RngStream(500 + static_cast<std::uint64_t>(trial)));
    const std::int64_t j = static_cast<std::int64_t>(data_rng.below(p));

    KnockoffStatistics grad0 = gradient_statistics(net, x, xk, y);
    KnockoffStatistics filt0 = filter_statistics(net);

    Tensor xs = x.clone(), ks = xk.clone();
    swap_columns(xs, ks, j);
    swap_filter_pair(net, j);

    KnockoffStatistics grad1 = gradient_statistics(net, xs, ks, y);
    KnockoffStatistics filt1 = filter_statistics(net);

    for (std::int64_t k = 0; k < p; ++k) {
      if (k == j) {
        CHECK(filt1.w[static_cast<std::size_t>(k)] ==
              -filt0.w[static_cast<std::size_t>(k)]);  // exact negation
        const double a = grad1.w[static_cast<std::size_t>(k)];
        const double b = -grad0.w[static_cast<std::size_t>(k)];
        CHECK(std::abs(a - b) <=
              1e-10 * std::max({std::abs(a), std::abs(b), 1e-30}));
      } else {
        CHECK(filt1.w[static_cast<std::size_t>(k)] ==
              filt0.w[static_cast<std::size_t>(k)]);
        CHECK(grad1.w[static_cast<std::size_t>(k)] ==
              grad0.w[static_cast<std::size_t>(k)]);
      }
    }
  }
}

TEST_CASE("filter statistic arithmetic on fixed weights") {
  FilterNetworkConfig cfg;
  cfg.hidden = {};  // single linear map keeps w_eff explicit
  FilterNetwork net(2, cfg, RngStream(61));
  set_param(net, "filter_z", Tensor::from_data({2}, {0.8, 1.0}));
  set_param(net, "filter_zk", Tensor::from_data({2}, {0.2, 1.0}));
  set_param(net, "w0", Tensor::from_data({2, 1}, {2.0, 0.0}));

  KnockoffStatistics stats = filter_statistics(net);
  // (2*0.8)^2 - (2*0.2)^2 = 2.56 - 0.16.
  CHECK(stats.w[0] == doctest::Approx(2.40).epsilon(1e-12));
  // Zero effective weight kills the statistic regardless of filters.
  CHECK(stats.w[1] == 0.0);
}

TEST_CASE("null statistics have symmetric signs") {
  // Exchangeable-by-construction nulls: features iid, knockoffs an
  // independent copy, response independent of both. Signs of W over many
  // features should be a fair coin (binomial check at the 1% level).
  const std::int64_t n = 200, p = 60;
  std::vector<double> w_all;
  for (int rep = 0; rep < 5; ++rep) {
    RngStream rng(700 + static_cast<std::uint64_t>(rep));
    Tensor x = Tensor::randn({n, p}, rng);
    Tensor xk = Tensor::randn({n, p}, rng);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (double& v : y) v = rng.normal();

    FilterNetworkConfig cfg;
    cfg.epochs = 40;
    cfg.seed = 800 + static_cast<std::uint64_t>(rep);
    FilterTrainResult r = train_filter_network(x, xk, y, cfg);
    KnockoffStatistics g = gradient_statistics(r.net, x, xk, y);
    w_all.insert(w_all.end(), g.w.begin(), g.w.end());
  }
  REQUIRE(w_all.size() >= 200);
  std::int64_t nonzero = 0, positive = 0;
  for (double v : w_all) {
    if (v == 0.0) continue;
    ++nonzero;
    if (v > 0.0) ++positive;
  }
  // Two-sided binomial bound at the 1% level via the normal approximation.
  const double mean = static_cast<double>(nonzero) / 2.0;
  const double sd = std::sqrt(static_cast<double>(nonzero) * 0.25);
  CHECK(std::abs(static_cast<double>(positive) - mean) <= 2.576 * sd);
}
