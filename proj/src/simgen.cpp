#include "knockoffs/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "knockoffs/errors.hpp"

namespace knockoffs {

Scenario scenario_from_string(const std::string& s) {
  if (s == "linear") return Scenario::kLinear;
  if (s == "polynomial") return Scenario::kPolynomial;
  if (s == "mixed") return Scenario::kMixed;
  if (s == "bottleneck") return Scenario::kBottleneck;
  if (s == "multiscale") return Scenario::kMultiscale;
  if (s == "network") return Scenario::kNetwork;
  throw ConfigError("unknown scenario '" + s + "'");
}

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kLinear: return "linear";
    case Scenario::kPolynomial: return "polynomial";
    case Scenario::kMixed: return "mixed";
    case Scenario::kBottleneck: return "bottleneck";
    case Scenario::kMultiscale: return "multiscale";
    case Scenario::kNetwork: return "network";
  }
  throw ConfigError("unknown scenario value");
}

std::vector<Scenario> all_scenarios() {
  return {Scenario::kLinear,     Scenario::kPolynomial,
          Scenario::kMixed,      Scenario::kBottleneck,
          Scenario::kMultiscale, Scenario::kNetwork};
}

std::vector<std::int64_t> SimConfig::block_sizes() const {
  std::vector<std::int64_t> sizes;
  std::int64_t left = p;
  while (left > 0) {
    const std::int64_t b = std::min(block_size, left);
    sizes.push_back(b);
    left -= b;
  }
  return sizes;
}

void SimConfig::validate() const {
  if (n < 1 || p < 1) throw ConfigError("simulation needs n >= 1, p >= 1");
  if (s < 1 || s > p) throw ConfigError("causal count s must lie in [1, p]");
  if (block_size < 1) throw ConfigError("block size must be positive");
  if (!(rho_min > 0.0 && rho_max < 1.0 && rho_min <= rho_max))
    throw ConfigError("rho range must lie inside (0, 1)");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("q must lie in (0, 1)");
  if (repetitions < 1) throw ConfigError("repetitions must be positive");
}

Tensor sample_block_latent(std::int64_t n,
                           std::span<const std::int64_t> block_sizes,
                           std::span<const double> rho, RngStream& rng) {
  if (block_sizes.size() != rho.size())
    throw ConfigError("sample_block_latent: one rho per block required");
  std::int64_t p = 0;
  for (std::int64_t b : block_sizes) p += b;
  Tensor latent = Tensor::zeros({n, p});
  auto d = latent.mutable_data();
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t j0 = 0;
    for (std::size_t blk = 0; blk < block_sizes.size(); ++blk) {
      const double r = rho[blk];
      const double shared = std::sqrt(r) * rng.normal();
      const double indiv = std::sqrt(1.0 - r);
      for (std::int64_t j = 0; j < block_sizes[blk]; ++j)
        d[static_cast<std::size_t>(i * p + j0 + j)] =
            shared + indiv * rng.normal();
      j0 += block_sizes[blk];
    }
  }
  return latent;
}

ExpressionData generate_expression(const SimConfig& cfg) {
  cfg.validate();
  RngStream master(cfg.seed);
  const std::vector<std::int64_t> sizes = cfg.block_sizes();

  ExpressionData data;
  RngStream rho_rng = master.derive("rho");
  data.truth.block_rho.reserve(sizes.size());
  for (std::size_t b = 0; b < sizes.size(); ++b)
    data.truth.block_rho.push_back(rho_rng.uniform(cfg.rho_min, cfg.rho_max));

  RngStream latent_rng = master.derive("latent");
  Tensor latent =
      sample_block_latent(cfg.n, sizes, data.truth.block_rho, latent_rng);

  RngStream base_rng = master.derive("baseline");
  data.truth.baseline_log.reserve(static_cast<std::size_t>(cfg.p));
  for (std::int64_t j = 0; j < cfg.p; ++j)
    data.truth.baseline_log.push_back(base_rng.uniform(2.0, 6.0));

  RngStream lib_rng = master.derive("library");
  data.truth.library_sizes.reserve(static_cast<std::size_t>(cfg.n));
  for (std::int64_t i = 0; i < cfg.n; ++i)
    data.truth.library_sizes.push_back(
        std::exp(lib_rng.normal(std::log(1e6), 0.5)));

  // expression -> library-size counts -> transcripts per million
  Tensor tpm = Tensor::zeros({cfg.n, cfg.p});
  auto t = tpm.mutable_data();
  auto z = latent.data();
  for (std::int64_t i = 0; i < cfg.n; ++i) {
    double row_sum = 0.0;
    for (std::int64_t j = 0; j < cfg.p; ++j) {
      const double e =
          std::exp(data.truth.baseline_log[static_cast<std::size_t>(j)] +
                   z[static_cast<std::size_t>(i * cfg.p + j)]);
      t[static_cast<std::size_t>(i * cfg.p + j)] = e;
      row_sum += e;
    }
    const double lib = data.truth.library_sizes[static_cast<std::size_t>(i)];
    // rows scaled to the library size, then per-million normalized; the
    // library size cancels but is recorded as part of the generative story
    const double to_tpm = (lib / row_sum) * (1e6 / lib);
    for (std::int64_t j = 0; j < cfg.p; ++j)
      t[static_cast<std::size_t>(i * cfg.p + j)] *= to_tpm;
  }
  data.tpm = make_matrix(std::move(tpm));

  // causal genes lean toward high expression
  std::vector<double> mean_tpm(static_cast<std::size_t>(cfg.p), 0.0);
  for (std::int64_t j = 0; j < cfg.p; ++j) {
    double m = 0.0;
    for (std::int64_t i = 0; i < cfg.n; ++i) m += data.tpm.values.at(i, j);
    mean_tpm[static_cast<std::size_t>(j)] = m / static_cast<double>(cfg.n);
  }
  const double max_mean =
      *std::max_element(mean_tpm.begin(), mean_tpm.end());
  std::vector<double> weight(static_cast<std::size_t>(cfg.p));
  for (std::int64_t j = 0; j < cfg.p; ++j)
    weight[static_cast<std::size_t>(j)] =
        std::exp(mean_tpm[static_cast<std::size_t>(j)] / max_mean);

  RngStream causal_rng = master.derive("causal");
  std::vector<bool> taken(static_cast<std::size_t>(cfg.p), false);
  for (std::int64_t k = 0; k < cfg.s; ++k) {
    double total = 0.0;
    for (std::int64_t j = 0; j < cfg.p; ++j)
      if (!taken[static_cast<std::size_t>(j)])
        total += weight[static_cast<std::size_t>(j)];
    double u = causal_rng.uniform() * total;
    std::int64_t pick = -1;
    for (std::int64_t j = 0; j < cfg.p; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      u -= weight[static_cast<std::size_t>(j)];
      if (u <= 0.0) {
        pick = j;
        break;
      }
    }
    if (pick < 0) {  // numerical tail: take the last free index
      for (std::int64_t j = cfg.p - 1; j >= 0; --j)
        if (!taken[static_cast<std::size_t>(j)]) {
          pick = j;
          break;
        }
    }
    taken[static_cast<std::size_t>(pick)] = true;
    data.truth.causal.push_back(pick);
  }
  data.truth.beta.assign(static_cast<std::size_t>(cfg.p), 0.0);
  return data;
}

std::vector<double> scenario_transform(Scenario scenario, const Tensor& x,
                                       std::span<const double> y_base,
                                       const ScenarioTruth& truth,
                                       std::span<const double> net_weights) {
  const std::int64_t n = x.rows();
  if (static_cast<std::int64_t>(y_base.size()) != n)
    throw DataError("scenario_transform: base response length mismatch");
  const auto& causal = truth.causal;
  std::vector<double> u(y_base.begin(), y_base.end());

  switch (scenario) {
    case Scenario::kLinear:
      break;
    case Scenario::kPolynomial: {
      // first two causal genes carry the extra quadratic terms
      const std::size_t n2 = std::min<std::size_t>(2, causal.size());
      for (std::int64_t i = 0; i < n; ++i) {
        const double y = y_base[static_cast<std::size_t>(i)];
        double v = y + 0.3 * y * y + 0.1 * y * y * y;
        for (std::size_t k = 0; k < n2; ++k) {
          const double xj = x.at(i, causal[k]);
          v += 0.2 * xj * xj;
        }
        u[static_cast<std::size_t>(i)] = v;
      }
      break;
    }
    case Scenario::kMixed: {
      double mean_sq = 0.0;
      for (double y : y_base) mean_sq += y * y;
      mean_sq /= static_cast<double>(n);
      for (std::int64_t i = 0; i < n; ++i) {
        const double y = y_base[static_cast<std::size_t>(i)];
        const double clipped = std::clamp(0.3 * y, -5.0, 5.0);
        u[static_cast<std::size_t>(i)] = 0.3 * y + 0.3 * std::tanh(y) +
                                         0.2 * (y * y - mean_sq) +
                                         0.2 * (std::exp(clipped) - 1.0);
      }
      break;
    }
    case Scenario::kBottleneck: {
      for (std::int64_t i = 0; i < n; ++i) {
        const double y = y_base[static_cast<std::size_t>(i)];
        const double t = std::tanh(y / 2.0);
        double v = t + 0.2 * (t - y) * (t - y);
        for (std::size_t k = 0; k < causal.size(); ++k) {
          // gene-specific expansions cycle: exp(-|t|), t^2 sign(t), sin(pi t)
          double f;
          switch (k % 3) {
            case 0: f = std::exp(-std::abs(t)); break;
            case 1: f = t * t * (t > 0 ? 1.0 : (t < 0 ? -1.0 : 0.0)); break;
            default: f = std::sin(std::numbers::pi * t); break;
          }
          v += 0.3 * f * x.at(i, causal[k]);
        }
        u[static_cast<std::size_t>(i)] = v;
      }
      break;
    }
    case Scenario::kMultiscale: {
      static constexpr double kFreqs[5] = {0.5, 1.0, 2.0, 4.0, 8.0};
      for (std::int64_t i = 0; i < n; ++i) {
        const double y = y_base[static_cast<std::size_t>(i)];
        const double env = 1.0 + 0.5 * std::tanh(y / 2.0);
        double v = y * env;
        for (std::size_t k = 0; k < causal.size(); ++k) {
          const double w = kFreqs[k % 5];
          const double xj = x.at(i, causal[k]);
          v += 0.3 * std::sin(w * xj) + 0.1 * std::sin(2.0 * w * xj);
        }
        for (std::size_t k = 0; k < causal.size(); ++k)
          for (std::size_t l = k + 1; l < causal.size(); ++l)
            v += 0.1 * std::sin(kFreqs[k % 5] * x.at(i, causal[k])) *
                 std::sin(kFreqs[l % 5] * x.at(i, causal[l]));
        u[static_cast<std::size_t>(i)] = v;
      }
      break;
    }
    case Scenario::kNetwork: {
      if (net_weights.size() != 3 * causal.size())
        throw DataError("scenario_transform: network weights must be 3 x causal");
      for (std::int64_t i = 0; i < n; ++i) {
        const double y = y_base[static_cast<std::size_t>(i)];
        const double g1 = std::tanh(y);
        const double g2 = g1 * std::exp(-std::abs(g1) / 2.0);
        const double g3 =
            (g2 > 0 ? 1.0 : (g2 < 0 ? -1.0 : 0.0)) * std::sqrt(std::abs(g2));
        const double g[3] = {g1, g2, g3};
        double v = 0.2 * g1 * g3;
        for (int layer = 0; layer < 3; ++layer)
          for (std::size_t k = 0; k < causal.size(); ++k)
            v += net_weights[static_cast<std::size_t>(layer) * causal.size() + k] *
                 g[layer] * x.at(i, causal[k]);
        u[static_cast<std::size_t>(i)] = v;
      }
      break;
    }
  }
  return u;
}

Outcome generate_outcome(Scenario scenario, const Tensor& x_std,
                         ScenarioTruth& truth, double amplitude,
                         std::uint64_t seed, double noise_sd) {
  const std::int64_t n = x_std.rows(), p = x_std.cols();
  if (amplitude < 0.0) throw ConfigError("amplitude must be non-negative");
  for (std::int64_t j : truth.causal)
    if (j < 0 || j >= p)
      throw DataError("generate_outcome: causal index out of range");

  RngStream master(seed);
  RngStream beta_rng = master.derive("beta");
  Outcome out;
  out.beta.assign(static_cast<std::size_t>(p), 0.0);
  const double sd = std::sqrt(amplitude);  // beta_j ~ N(0, amplitude)
  for (std::int64_t j : truth.causal)
    out.beta[static_cast<std::size_t>(j)] = beta_rng.normal() * sd;
  truth.beta = out.beta;

  std::vector<double> y_base(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (std::int64_t j : truth.causal)
      v += x_std.at(i, j) * out.beta[static_cast<std::size_t>(j)];
    y_base[static_cast<std::size_t>(i)] = v;
  }

  std::vector<double> net_weights;
  if (scenario == Scenario::kNetwork) {
    RngStream w_rng = master.derive("net-weights");
    net_weights.resize(3 * truth.causal.size());
    for (double& w : net_weights) w = w_rng.normal() * 0.3;
  }

  out.y = scenario_transform(scenario, x_std, y_base, truth, net_weights);

  RngStream noise_rng = master.derive("noise");
  for (double& v : out.y) v += noise_sd * noise_rng.normal();

  double mean = 0.0;
  for (double v : out.y) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : out.y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (var == 0.0)
    throw NumericalError("generate_outcome: response is constant");
  const double inv_sd = 1.0 / std::sqrt(var);
  for (double& v : out.y) v = (v - mean) * inv_sd;
  return out;
}

}  // namespace knockoffs
