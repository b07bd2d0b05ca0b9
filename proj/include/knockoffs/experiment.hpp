#pragma once

#include <functional>

#include "knockoffs/autoencoder.hpp"
#include "knockoffs/diffusion.hpp"
#include "knockoffs/filter_network.hpp"
#include "knockoffs/selection.hpp"
#include "knockoffs/simgen.hpp"

namespace knockoffs {

enum class GeneratorKind { kDiffusion, kAutoencoder };
GeneratorKind generator_from_string(const std::string& s);
const char* generator_name(GeneratorKind g);

struct ExperimentConfig {
  SimConfig sim;  // n, p, s, blocks, rho; scenario/amplitude fields unused
  std::vector<Scenario> scenarios = {Scenario::kLinear};
  std::vector<double> amplitudes = {3.0};
  std::int64_t repetitions = 50;
  std::vector<GeneratorKind> generators = {GeneratorKind::kDiffusion};
  DiffusionTrainConfig diffusion = DiffusionTrainConfig::desk_scale();
  AutoencoderConfig autoencoder;
  FilterNetworkConfig filter;
  double q = 0.2;
  std::uint64_t master_seed = 0;
  int workers = 0;  // 0: KNOCKOFF_WORKERS or hardware
};

struct RepRecord {
  Scenario scenario{};
  double amplitude = 0.0;
  GeneratorKind generator{};
  StatisticMethod statistic{};
  std::int64_t rep = 0;
  double power = 0.0;
  double fdp = 0.0;
  std::int64_t n_selected = 0;
  bool failed = false;
  std::string error;
};

struct ArmSummary {
  Scenario scenario{};
  double amplitude = 0.0;
  GeneratorKind generator{};
  StatisticMethod statistic{};
  std::int64_t completed = 0, failed = 0;
  double mean_power = 0.0, se_power = 0.0;
  double mean_fdp = 0.0, se_fdp = 0.0;
};

struct EvalTable {
  std::vector<RepRecord> records;
  std::vector<ArmSummary> summaries;
  bool partial = false;  // any arm failure recorded

  const ArmSummary& summary(Scenario sc, double amplitude, GeneratorKind g,
                            StatisticMethod m) const;
};

// Runs the grid scenarios x amplitudes x repetitions (x generators).
// Every repetition derives its RNG stream from (master seed, scenario,
// amplitude, rep), so scheduling and worker count never affect results.
// Both statistics are computed from one trained selection network per
// (generator, repetition). Failed arms are recorded and skipped.
EvalTable run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const RepRecord&)>& on_record = nullptr);

void write_eval_csv(const EvalTable& table, const std::filesystem::path& path);
void write_eval_summary_json(const EvalTable& table,
                             const std::filesystem::path& path);

}  // namespace knockoffs
