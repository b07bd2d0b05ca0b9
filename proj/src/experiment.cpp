#include "knockoffs/experiment.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <fstream>
#include <mutex>

#include "knockoffs/errors.hpp"
#include "knockoffs/normalize.hpp"
#include "knockoffs/parallel.hpp"

namespace knockoffs {

GeneratorKind generator_from_string(const std::string& s) {
  if (s == "diffusion") return GeneratorKind::kDiffusion;
  if (s == "autoencoder") return GeneratorKind::kAutoencoder;
  throw ConfigError("unknown generator '" + s + "'");
}

const char* generator_name(GeneratorKind g) {
  return g == GeneratorKind::kDiffusion ? "diffusion" : "autoencoder";
}

const ArmSummary& EvalTable::summary(Scenario sc, double amplitude,
                                     GeneratorKind g,
                                     StatisticMethod m) const {
  for (const ArmSummary& s : summaries)
    if (s.scenario == sc && s.amplitude == amplitude && s.generator == g &&
        s.statistic == m)
      return s;
  throw ConfigError("no summary for requested arm");
}

namespace {

struct WorkItem {
  Scenario scenario;
  double amplitude;
  std::int64_t rep;
};

// One knockoff-and-select pass; returns records for both statistics.
std::vector<RepRecord> run_one(const ExperimentConfig& cfg,
                               const WorkItem& item) {
  RngStream rep_stream =
      RngStream(cfg.master_seed)
          .derive(scenario_name(item.scenario),
                  std::bit_cast<std::uint64_t>(item.amplitude),
                  static_cast<std::uint64_t>(item.rep));

  SimConfig sim = cfg.sim;
  sim.scenario = item.scenario;
  sim.amplitude = item.amplitude;
  sim.q = cfg.q;
  sim.seed = rep_stream.derive("sim").key();

  ExpressionData data = generate_expression(sim);
  NormalizedMatrix normalized = normalize(data.tpm, NormalizeSpec{});
  const Tensor& x = normalized.matrix.values;

  Outcome outcome =
      generate_outcome(item.scenario, x, data.truth, item.amplitude,
                       rep_stream.derive("outcome").key());

  std::vector<RepRecord> records;
  for (GeneratorKind gen : cfg.generators) {
    RepRecord base;
    base.scenario = item.scenario;
    base.amplitude = item.amplitude;
    base.generator = gen;
    base.rep = item.rep;
    try {
      KnockoffMatrix knockoffs;
      if (gen == GeneratorKind::kDiffusion) {
        DiffusionTrainConfig dcfg = cfg.diffusion;
        dcfg.seed = rep_stream.derive("train-diffusion").key();
        DenoiserTrainResult trained = train_denoiser(x, dcfg);
        knockoffs = generate_knockoffs(
            trained.model, trained.schedule, x,
            rep_stream.derive("sample-diffusion").key(), /*workers=*/1);
      } else {
        AutoencoderConfig acfg = cfg.autoencoder;
        acfg.seed = rep_stream.derive("train-autoencoder").key();
        AutoencoderTrainResult trained = train_autoencoder(x, acfg);
        knockoffs = generate_ae_knockoffs(
            trained.model, x, rep_stream.derive("sample-autoencoder").key());
      }

      FilterNetworkConfig fcfg = cfg.filter;
      fcfg.seed = rep_stream.derive("filter", static_cast<std::uint64_t>(gen)).key();
      FilterTrainResult net =
          train_filter_network(x, knockoffs.values, outcome.y, fcfg);

      for (StatisticMethod method :
           {StatisticMethod::kGradient, StatisticMethod::kFilter}) {
        RepRecord rec = base;
        rec.statistic = method;
        KnockoffStatistics stats =
            method == StatisticMethod::kGradient
                ? gradient_statistics(net.net, x, knockoffs.values, outcome.y)
                : filter_statistics(net.net);
        SelectionResult sel = knockoff_plus_select(stats, cfg.q);
        SelectionQuality quality =
            evaluate_selection(sel.selected, data.truth.causal);
        rec.power = quality.power;
        rec.fdp = quality.fdp;
        rec.n_selected = static_cast<std::int64_t>(sel.selected.size());
        records.push_back(std::move(rec));
      }
    } catch (const std::exception& e) {
      for (StatisticMethod method :
           {StatisticMethod::kGradient, StatisticMethod::kFilter}) {
        RepRecord rec = base;
        rec.statistic = method;
        rec.failed = true;
        rec.error = e.what();
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

}  // namespace

EvalTable run_experiment(const ExperimentConfig& cfg,
                         const std::function<void(const RepRecord&)>& on_record) {
  cfg.sim.validate();
  if (cfg.amplitudes.empty() || cfg.scenarios.empty() || cfg.generators.empty())
    throw ConfigError("run_experiment: empty grid");
  if (cfg.repetitions < 1) throw ConfigError("run_experiment: no repetitions");

  std::vector<WorkItem> items;
  for (Scenario sc : cfg.scenarios)
    for (double amp : cfg.amplitudes)
      for (std::int64_t rep = 0; rep < cfg.repetitions; ++rep)
        items.push_back({sc, amp, rep});

  // Slot per item keeps record order deterministic under any scheduling.
  std::vector<std::vector<RepRecord>> slots(items.size());
  std::mutex cb_mutex;
  parallel_for(static_cast<std::int64_t>(items.size()),
               resolve_workers(cfg.workers), [&](std::int64_t i) {
                 slots[static_cast<std::size_t>(i)] =
                     run_one(cfg, items[static_cast<std::size_t>(i)]);
                 if (on_record) {
                   std::lock_guard<std::mutex> lock(cb_mutex);
                   for (const RepRecord& r : slots[static_cast<std::size_t>(i)])
                     on_record(r);
                 }
               });

  EvalTable table;
  for (auto& slot : slots)
    for (RepRecord& r : slot) {
      table.partial = table.partial || r.failed;
      table.records.push_back(std::move(r));
    }

  for (Scenario sc : cfg.scenarios)
    for (double amp : cfg.amplitudes)
      for (GeneratorKind gen : cfg.generators)
        for (StatisticMethod method :
             {StatisticMethod::kGradient, StatisticMethod::kFilter}) {
          ArmSummary s;
          s.scenario = sc;
          s.amplitude = amp;
          s.generator = gen;
          s.statistic = method;
          std::vector<double> powers, fdps;
          for (const RepRecord& r : table.records) {
            if (r.scenario != sc || r.amplitude != amp || r.generator != gen ||
                r.statistic != method)
              continue;
            if (r.failed) {
              ++s.failed;
              continue;
            }
            powers.push_back(r.power);
            fdps.push_back(r.fdp);
          }
          s.completed = static_cast<std::int64_t>(powers.size());
          auto mean_se = [](const std::vector<double>& v) {
            if (v.empty()) return std::pair{0.0, 0.0};
            double m = 0.0;
            for (double x : v) m += x;
            m /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - m) * (x - m);
            var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
            return std::pair{m, std::sqrt(var / static_cast<double>(v.size()))};
          };
          std::tie(s.mean_power, s.se_power) = mean_se(powers);
          std::tie(s.mean_fdp, s.se_fdp) = mean_se(fdps);
          table.summaries.push_back(std::move(s));
        }
  return table;
}

void write_eval_csv(const EvalTable& table,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "scenario,amplitude,generator,statistic,rep,power,fdp,n_selected,"
         "failed,error\n";
  for (const RepRecord& r : table.records) {
    out << scenario_name(r.scenario) << ',' << format_double(r.amplitude)
        << ',' << generator_name(r.generator) << ','
        << statistic_method_name(r.statistic) << ',' << r.rep << ','
        << format_double(r.power) << ',' << format_double(r.fdp) << ','
        << r.n_selected << ',' << (r.failed ? 1 : 0) << ',' << r.error << '\n';
  }
}

void write_eval_summary_json(const EvalTable& table,
                             const std::filesystem::path& path) {
  nlohmann::json arms = nlohmann::json::array();
  for (const ArmSummary& s : table.summaries) {
    arms.push_back({{"scenario", scenario_name(s.scenario)},
                    {"amplitude", s.amplitude},
                    {"generator", generator_name(s.generator)},
                    {"statistic", statistic_method_name(s.statistic)},
                    {"completed", s.completed},
                    {"failed", s.failed},
                    {"mean_power", s.mean_power},
                    {"se_power", s.se_power},
                    {"mean_fdp", s.mean_fdp},
                    {"se_fdp", s.se_fdp}});
  }
  nlohmann::json j{{"partial", table.partial}, {"arms", arms}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace knockoffs
