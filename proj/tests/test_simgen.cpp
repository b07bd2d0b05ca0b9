#include <doctest.h>

#include <cmath>
#include <numbers>

#include "knockoffs/errors.hpp"
#include "knockoffs/normalize.hpp"
#include "knockoffs/simgen.hpp"

using namespace knockoffs;

namespace {

double pair_corr(const Tensor& x, std::int64_t a, std::int64_t b) {
  const std::int64_t n = x.rows();
  double ma = 0, mb = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    ma += x.at(i, a);
    mb += x.at(i, b);
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double da = x.at(i, a) - ma, db = x.at(i, b) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("block latent correlation tracks rho") {
  RngStream rng(1);
  const std::vector<std::int64_t> sizes = {10, 10};
  const std::vector<double> rho = {0.6, 0.6};
  Tensor latent = sample_block_latent(1000, sizes, rho, rng);

  double within = 0.0;
  int count = 0;
  for (std::int64_t a = 0; a < 10; ++a)
    for (std::int64_t b = a + 1; b < 10; ++b) {
      within += pair_corr(latent, a, b);
      ++count;
    }
  CHECK(within / count == doctest::Approx(0.6).epsilon(0.085));

  // Across blocks there is no shared factor.
  double across = 0.0;
  for (std::int64_t a = 0; a < 10; ++a) across += pair_corr(latent, a, 10 + a);
  CHECK(std::abs(across / 10) < 0.1);

  // rho = 0 collapses to independent coordinates.
  RngStream rng0(2);
  const std::vector<double> zero = {0.0, 0.0};
  Tensor indep = sample_block_latent(1000, sizes, zero, rng0);
  for (std::int64_t a = 0; a < 20; a += 3)
    for (std::int64_t b = a + 1; b < 20; b += 3)
      CHECK(std::abs(pair_corr(indep, a, b)) <= 0.1);
}

TEST_CASE("expression generation is deterministic and TPM-scaled") {
  SimConfig cfg;
  cfg.n = 100;
  cfg.p = 20;
  cfg.s = 4;
  cfg.seed = 77;
  ExpressionData a = generate_expression(cfg);
  ExpressionData b = generate_expression(cfg);
  for (std::int64_t i = 0; i < a.tpm.values.size(); ++i)
    CHECK(a.tpm.values[i] == b.tpm.values[i]);
  CHECK(a.truth.causal == b.truth.causal);

  for (std::int64_t i = 0; i < cfg.n; ++i) {
    double row = 0.0;
    for (std::int64_t j = 0; j < cfg.p; ++j) row += a.tpm.values.at(i, j);
    CHECK(row == doctest::Approx(1e6).epsilon(1e-9));
  }
  CHECK(a.truth.causal.size() == 4);
  CHECK(a.truth.library_sizes.size() == 100);
  CHECK(a.truth.block_rho.size() == 2);
  for (double r : a.truth.block_rho) {
    CHECK(r >= 0.4);
    CHECK(r <= 0.8);
  }

  SimConfig bad = cfg;
  bad.s = 25;
  CHECK_THROWS_AS(generate_expression(bad), ConfigError);
}

TEST_CASE("outcomes are standardized with sparse coefficients") {
  SimConfig cfg;
  cfg.n = 300;
  cfg.p = 30;
  cfg.s = 5;
  cfg.seed = 5;
  ExpressionData data = generate_expression(cfg);
  Tensor x = normalize(data.tpm, NormalizeSpec{}).matrix.values;

  for (Scenario sc : all_scenarios()) {
    Outcome out = generate_outcome(sc, x, data.truth, 2.0, 99);
    double mean = 0.0;
    for (double v : out.y) mean += v;
    mean /= static_cast<double>(out.y.size());
    double var = 0.0;
    for (double v : out.y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(out.y.size());
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(var - 1.0) <= 1e-10);

    std::int64_t nonzero = 0;
    for (std::int64_t j = 0; j < cfg.p; ++j) {
      if (out.beta[static_cast<std::size_t>(j)] != 0.0) {
        ++nonzero;
        const bool causal =
            std::find(data.truth.causal.begin(), data.truth.causal.end(), j) !=
            data.truth.causal.end();
        CHECK(causal);
      }
    }
    CHECK(nonzero == 5);
  }
}

TEST_CASE("noise-free linear outcome is perfectly correlated with X beta") {
  SimConfig cfg;
  cfg.n = 200;
  cfg.p = 12;
  cfg.s = 3;
  cfg.seed = 8;
  ExpressionData data = generate_expression(cfg);
  Tensor x = normalize(data.tpm, NormalizeSpec{}).matrix.values;
  Outcome out =
      generate_outcome(Scenario::kLinear, x, data.truth, 4.0, 3, /*noise_sd=*/0.0);

  std::vector<double> y_base(static_cast<std::size_t>(cfg.n), 0.0);
  for (std::int64_t i = 0; i < cfg.n; ++i)
    for (std::int64_t j = 0; j < cfg.p; ++j)
      y_base[static_cast<std::size_t>(i)] +=
          x.at(i, j) * out.beta[static_cast<std::size_t>(j)];
  // corr(y, X beta) = 1 because y is just the standardized base signal.
  double my = 0, mb = 0;
  for (std::size_t i = 0; i < y_base.size(); ++i) {
    my += out.y[i];
    mb += y_base[i];
  }
  my /= static_cast<double>(cfg.n);
  mb /= static_cast<double>(cfg.n);
  double syb = 0, syy = 0, sbb = 0;
  for (std::size_t i = 0; i < y_base.size(); ++i) {
    syb += (out.y[i] - my) * (y_base[i] - mb);
    syy += (out.y[i] - my) * (out.y[i] - my);
    sbb += (y_base[i] - mb) * (y_base[i] - mb);
  }
  CHECK(syb / std::sqrt(syy * sbb) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero-amplitude polynomial outcome reduces to the quadratic term") {
  SimConfig cfg;
  cfg.n = 150;
  cfg.p = 10;
  cfg.s = 3;
  cfg.seed = 13;
  ExpressionData data = generate_expression(cfg);
  Tensor x = normalize(data.tpm, NormalizeSpec{}).matrix.values;
  Outcome out = generate_outcome(Scenario::kPolynomial, x, data.truth, 0.0, 21,
                                 /*noise_sd=*/0.0);
  // With beta = 0 only sum_{first two causal} 0.2 x_j^2 remains.
  std::vector<double> expect(static_cast<std::size_t>(cfg.n), 0.0);
  for (std::int64_t i = 0; i < cfg.n; ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      const double xj = x.at(i, data.truth.causal[k]);
      expect[static_cast<std::size_t>(i)] += 0.2 * xj * xj;
    }
  double mean = 0.0;
  for (double v : expect) mean += v;
  mean /= static_cast<double>(cfg.n);
  double var = 0.0;
  for (double v : expect) var += (v - mean) * (v - mean);
  var /= static_cast<double>(cfg.n);
  for (std::int64_t i = 0; i < cfg.n; ++i)
    CHECK(out.y[static_cast<std::size_t>(i)] ==
          doctest::Approx((expect[static_cast<std::size_t>(i)] - mean) /
                          std::sqrt(var))
              .epsilon(1e-10));
}

TEST_CASE("mixed transform matches the hand-evaluated value") {
  // y_base = [1, -1] gives an empirical second moment of exactly 1, so the
  // sample-0 value is 0.3 + 0.3 tanh(1) + 0 + 0.2 (e^0.3 - 1).
  ScenarioTruth truth;  // mixed uses no causal-specific terms
  Tensor x = Tensor::zeros({2, 1});
  std::vector<double> y_base = {1.0, -1.0};
  std::vector<double> u =
      scenario_transform(Scenario::kMixed, x, y_base, truth, {});
  CHECK(u[0] == doctest::Approx(0.5984500083019301).epsilon(1e-14));
}

namespace {

// Second, deliberately naive evaluator: per-sample scalar recomputation of
// the closed-form scenarios, for the 1e-12 agreement property.
double naive_scenario_value(Scenario sc, const Tensor& x,
                            const std::vector<double>& y_base,
                            const std::vector<std::int64_t>& causal,
                            std::int64_t i, double mean_sq) {
  const double y = y_base[static_cast<std::size_t>(i)];
  switch (sc) {
    case Scenario::kLinear:
      return y;
    case Scenario::kPolynomial: {
      double v = y + 0.3 * std::pow(y, 2) + 0.1 * std::pow(y, 3);
      v += 0.2 * std::pow(x.at(i, causal.at(0)), 2);
      v += 0.2 * std::pow(x.at(i, causal.at(1)), 2);
      return v;
    }
    case Scenario::kMixed: {
      double clipped = 0.3 * y;
      if (clipped > 5.0) clipped = 5.0;
      if (clipped < -5.0) clipped = -5.0;
      return 0.3 * y + 0.3 * std::tanh(y) + 0.2 * (y * y - mean_sq) +
             0.2 * (std::exp(clipped) - 1.0);
    }
    case Scenario::kBottleneck: {
      const double t = std::tanh(0.5 * y);
      double v = t + 0.2 * std::pow(t - y, 2);
      for (std::size_t k = 0; k < causal.size(); ++k) {
        double f = 0.0;
        if (k % 3 == 0) f = std::exp(-std::abs(t));
        if (k % 3 == 1) f = t * t * (t > 0 ? 1 : (t < 0 ? -1 : 0));
        if (k % 3 == 2) f = std::sin(std::numbers::pi * t);
        v += 0.3 * f * x.at(i, causal[k]);
      }
      return v;
    }
    default:
      FAIL("naive evaluator only covers the closed-form scenarios");
      return 0.0;
  }
}

}  // namespace

TEST_CASE("scenario transforms agree with the naive evaluator to 1e-12") {
  RngStream rng(31);
  const std::int64_t n = 64, p = 8;
  Tensor x = Tensor::randn({n, p}, rng);
  ScenarioTruth truth;
  truth.causal = {5, 1, 6};
  std::vector<double> y_base(static_cast<std::size_t>(n));
  for (double& v : y_base) v = rng.normal() * 2.0;
  double mean_sq = 0.0;
  for (double v : y_base) mean_sq += v * v;
  mean_sq /= static_cast<double>(n);

  for (Scenario sc : {Scenario::kLinear, Scenario::kPolynomial,
                      Scenario::kMixed, Scenario::kBottleneck}) {
    std::vector<double> u = scenario_transform(sc, x, y_base, truth, {});
    for (std::int64_t i = 0; i < n; ++i) {
      const double want = naive_scenario_value(sc, x, y_base, truth.causal, i,
                                               mean_sq);
      CHECK(u[static_cast<std::size_t>(i)] ==
            doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("network scenario needs its weights, multiscale mixes frequencies") {
  RngStream rng(37);
  Tensor x = Tensor::randn({10, 5}, rng);
  ScenarioTruth truth;
  truth.causal = {0, 2};
  std::vector<double> y_base(10, 0.5);
  CHECK_THROWS_AS(
      scenario_transform(Scenario::kNetwork, x, y_base, truth, {}), DataError);

  std::vector<double> w(6, 0.1);
  std::vector<double> u =
      scenario_transform(Scenario::kNetwork, x, y_base, truth, w);
  CHECK(u.size() == 10);

  // Multiscale at y_base = 0: envelope term vanishes, oscillations remain.
  std::vector<double> zeros(10, 0.0);
  std::vector<double> m =
      scenario_transform(Scenario::kMultiscale, x, zeros, truth, {});
  for (std::int64_t i = 0; i < 10; ++i) {
    const double want =
        0.3 * std::sin(0.5 * x.at(i, 0)) + 0.1 * std::sin(1.0 * x.at(i, 0)) +
        0.3 * std::sin(1.0 * x.at(i, 2)) + 0.1 * std::sin(2.0 * x.at(i, 2)) +
        0.1 * std::sin(0.5 * x.at(i, 0)) * std::sin(1.0 * x.at(i, 2));
    CHECK(m[static_cast<std::size_t>(i)] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("scenario names round-trip") {
  for (Scenario sc : all_scenarios())
    CHECK(scenario_from_string(scenario_name(sc)) == sc);
  CHECK_THROWS_AS(scenario_from_string("cubic"), ConfigError);
}
