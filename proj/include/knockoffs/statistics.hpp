#pragma once

#include <filesystem>
#include <string>

#include "knockoffs/filter_network.hpp"

namespace knockoffs {

enum class StatisticMethod { kGradient, kFilter };

// Antisymmetric per-feature importance: swapping (x_j, xk_j) together with
// (z_j, zk_j) negates entry j and leaves the others untouched.
struct KnockoffStatistics {
  std::vector<double> w;
  StatisticMethod method = StatisticMethod::kGradient;
  std::uint64_t model_hash = 0;
  std::uint64_t data_hash = 0;
};

// Loss-sensitivity statistic: mean_i |dL_i/dx_ij| - mean_i |dL_i/dxk_ij|,
// gradients taken at the observed inputs in eval mode (dropout off).
// Per-sample losses are the unaveraged squared error or cross entropy.
KnockoffStatistics gradient_statistics(const FilterNetwork& net,
                                       const Tensor& x, const Tensor& xk,
                                       const std::vector<double>& y);

// Parameter-path statistic: with w_eff the product of the linear layers
// (normalizations and activations skipped) and (a_j, b_j) the normalized
// filter pair, W_j = (w_eff_j a_j)^2 - (w_eff_j b_j)^2.
KnockoffStatistics filter_statistics(const FilterNetwork& net);

std::uint64_t augmented_data_hash(const Tensor& x, const Tensor& xk);

void write_statistics_csv(const KnockoffStatistics& stats,
                          const std::vector<std::string>& names,
                          const std::filesystem::path& path);
void write_statistics_json(const KnockoffStatistics& stats,
                           const std::vector<std::string>& names,
                           const std::filesystem::path& path);

const char* statistic_method_name(StatisticMethod m);

}  // namespace knockoffs
