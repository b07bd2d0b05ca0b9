#pragma once

#include <span>
#include <string>

#include "knockoffs/matrix_io.hpp"
#include "knockoffs/rng.hpp"

namespace knockoffs {

enum class Scenario {
  kLinear,
  kPolynomial,
  kMixed,
  kBottleneck,
  kMultiscale,
  kNetwork,
};

Scenario scenario_from_string(const std::string& s);
const char* scenario_name(Scenario s);
std::vector<Scenario> all_scenarios();

struct SimConfig {
  std::int64_t n = 1000;
  std::int64_t p = 50;
  std::int64_t s = 5;            // causal gene count
  std::int64_t block_size = 10;  // consecutive blocks; remainder forms a block
  double rho_min = 0.4, rho_max = 0.8;
  double amplitude = 3.0;
  Scenario scenario = Scenario::kLinear;
  double q = 0.2;
  std::int64_t repetitions = 50;
  std::uint64_t seed = 0;

  std::vector<std::int64_t> block_sizes() const;
  void validate() const;
};

struct ScenarioTruth {
  std::vector<std::int64_t> causal;   // in sampled order
  std::vector<double> beta;           // length p, zero off-support
  std::vector<double> library_sizes;  // n
  std::vector<double> baseline_log;   // p
  std::vector<double> block_rho;      // per block
};

struct ExpressionData {
  FeatureMatrix tpm;  // rows scaled to sum 1e6
  ScenarioTruth truth;
};

// Equicorrelated-block latent Gaussian, one rho per block.
Tensor sample_block_latent(std::int64_t n,
                           std::span<const std::int64_t> block_sizes,
                           std::span<const double> rho, RngStream& rng);

// TPM-like expression: exp(baseline + latent) scaled per row to the drawn
// library size and re-normalized to transcripts per million. Causal genes
// are drawn without replacement with weight exp(mean_j / max_k mean_k).
ExpressionData generate_expression(const SimConfig& cfg);

// Scenario response transform before noise and standardization. x is the
// standardized log-TPM feature matrix the models consume; `net_weights`
// feeds the network scenario (3 x |causal|, layer-major) and is ignored by
// the others.
std::vector<double> scenario_transform(Scenario scenario, const Tensor& x,
                                       std::span<const double> y_base,
                                       const ScenarioTruth& truth,
                                       std::span<const double> net_weights);

struct Outcome {
  std::vector<double> y;     // standardized to mean 0, variance 1
  std::vector<double> beta;  // coefficients drawn for this outcome
};

// Draws beta ~ N(0, amplitude) on the causal set, applies the scenario
// transform, adds N(0, noise_sd^2) noise and standardizes. Also writes the
// drawn beta back into `truth`.
Outcome generate_outcome(Scenario scenario, const Tensor& x_std,
                         ScenarioTruth& truth, double amplitude,
                         std::uint64_t seed, double noise_sd = 1.0);

}  // namespace knockoffs
