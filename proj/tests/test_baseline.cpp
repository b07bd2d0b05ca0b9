#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knockoffs/autoencoder.hpp"
#include "knockoffs/errors.hpp"

using namespace knockoffs;

namespace {

// Exact low-rank data: three latent factors mixed into p observed columns.
Tensor rank3_data(std::int64_t n, std::int64_t p, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor factors = Tensor::randn({n, 3}, rng);
  Tensor mix = Tensor::randn({3, p}, rng);
  Tensor x = Tensor::zeros({n, p});
  auto d = x.mutable_data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < p; ++j) {
      double v = 0.0;
      for (std::int64_t k = 0; k < 3; ++k)
        v += factors.at(i, k) * mix.at(k, j);
      d[static_cast<std::size_t>(i * p + j)] = v;
    }
  return x;
}

double matrix_variance(const Tensor& x) {
  double mean = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) mean += x[i];
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i)
    var += (x[i] - mean) * (x[i] - mean);
  return var / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("rank-3 structure is reconstructed almost exactly") {
  Tensor data = rank3_data(200, 10, 1);
  AutoencoderConfig cfg;
  cfg.epochs = 400;
  cfg.lr = 5e-3;
  cfg.seed = 2;
  AutoencoderTrainResult r = train_autoencoder(data, cfg);

  NoGradGuard ng;
  Tensor recon = r.model.reconstruct(data).value();
  double mse = 0.0;
  for (std::int64_t i = 0; i < data.size(); ++i)
    mse += std::pow(recon[i] - data[i], 2);
  mse /= static_cast<double>(data.size());
  CHECK(mse <= 0.05 * matrix_variance(data));
}

TEST_CASE("constant columns converge to the constant") {
  RngStream rng(3);
  Tensor data = Tensor::randn({100, 4}, rng);
  auto d = data.mutable_data();
  for (std::int64_t i = 0; i < 100; ++i) d[static_cast<std::size_t>(i * 4)] = 3.0;

  AutoencoderConfig cfg;
  cfg.epochs = 2500;
  cfg.lr = 1e-2;
  cfg.seed = 4;
  AutoencoderTrainResult r = train_autoencoder(data, cfg);
  NoGradGuard ng;
  Tensor recon = r.model.reconstruct(data).value();
  for (std::int64_t i = 0; i < 100; ++i)
    CHECK(recon.at(i, 0) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("autoencoder training is deterministic") {
  Tensor data = rank3_data(60, 6, 5);
  AutoencoderConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 6;
  AutoencoderTrainResult a = train_autoencoder(data, cfg);
  AutoencoderTrainResult b = train_autoencoder(data, cfg);
  CHECK(a.model.param_hash() == b.model.param_hash());
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK_THROWS_AS(train_autoencoder(Tensor(), cfg), DataError);
}

TEST_CASE("knockoffs follow the documented construction") {
  Tensor data = rank3_data(80, 5, 7);
  AutoencoderConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 8;
  AutoencoderTrainResult r = train_autoencoder(data, cfg);

  const std::uint64_t seed = 4242;
  KnockoffMatrix ko = generate_ae_knockoffs(r.model, data, seed);
  CHECK(ko.provenance == KnockoffMatrix::Provenance::kMarginalMatched);
  CHECK(ko.fingerprint.seed == seed);

  // Reconstruction + row-permuted residuals, then marginal matching.
  NoGradGuard ng;
  Tensor recon = r.model.reconstruct(data).value();
  RngStream perm_rng = RngStream(seed).derive("residual-perm");
  std::vector<std::int64_t> perm(80);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::int64_t i = 79; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[perm_rng.below(static_cast<std::uint64_t>(i + 1))]);
  Tensor raw = Tensor::zeros({80, 5});
  for (std::int64_t i = 0; i < 80; ++i)
    for (std::int64_t j = 0; j < 5; ++j)
      raw.mutable_data()[static_cast<std::size_t>(i * 5 + j)] =
          recon.at(i, j) + data.at(perm[static_cast<std::size_t>(i)], j) -
          recon.at(perm[static_cast<std::size_t>(i)], j);
  KnockoffMatrix want = match_marginals(data, raw);
  for (std::int64_t i = 0; i < ko.values.size(); ++i)
    CHECK(ko.values[i] == want.values[i]);
}

TEST_CASE("matched knockoff columns preserve column statistics exactly") {
  Tensor data = rank3_data(120, 6, 9);
  AutoencoderConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 10;
  AutoencoderTrainResult r = train_autoencoder(data, cfg);
  KnockoffMatrix ko = generate_ae_knockoffs(r.model, data, 11);

  for (std::int64_t j = 0; j < 6; ++j) {
    std::vector<double> a, b;
    double mean_a = 0.0, mean_b = 0.0;
    for (std::int64_t i = 0; i < 120; ++i) {
      a.push_back(data.at(i, j));
      b.push_back(ko.values.at(i, j));
      mean_a += data.at(i, j);
      mean_b += ko.values.at(i, j);
    }
    // Same multiset, so the mean is exactly preserved (up to summation
    // order in this check).
    CHECK(mean_a == doctest::Approx(mean_b).epsilon(1e-13));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}
