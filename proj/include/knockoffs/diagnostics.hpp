#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "knockoffs/tensor.hpp"

namespace knockoffs {

// Two-sample Kolmogorov-Smirnov sup-distance between empirical CDFs.
double ks_statistic(std::span<const double> a, std::span<const double> b);

struct KnockoffQualityReport {
  std::vector<double> ks;          // per-feature two-sample KS
  std::vector<double> cross_corr;  // corr(x_j, xk_j)
  double max_corr_diff = 0.0;      // off-diagonal |corr(X) - corr(Xk)|
  double mean_corr_diff = 0.0;
  std::vector<double> swap_diffs;  // per random-swap probe
  double swap_max_diff = 0.0;
  double delta_hat = 0.0;  // exchangeability discrepancy: max per-feature KS

  Tensor corr_x, corr_xk;  // (p, p) correlation matrices
};

// Full knockoff-quality battery. The swap probes re-correlate the augmented
// [X | Xk] matrix after swapping a random feature subset and report the
// largest entry change; near-exchangeable pairs stay near zero.
KnockoffQualityReport quality_report(const Tensor& x, const Tensor& xk,
                                     int swap_trials = 16,
                                     std::uint64_t seed = 0);

// Distance correlation (biased V-statistic form); constant inputs return 0.
double distance_correlation(std::span<const double> a,
                            std::span<const double> b);

// Indices of the `keep` features with the largest distance correlation to
// y; ties break toward the smaller index. Result is sorted ascending.
std::vector<std::int64_t> screen_features(const Tensor& x,
                                          const std::vector<double>& y,
                                          std::int64_t keep);

void write_quality_report_json(const KnockoffQualityReport& report,
                               const std::vector<std::string>& names,
                               const std::filesystem::path& path);
// Long-format table (feature, metric, value) plus the correlation-difference
// matrix entries, ready for external plotting.
void write_quality_report_csv(const KnockoffQualityReport& report,
                              const std::vector<std::string>& names,
                              const std::filesystem::path& path);

}  // namespace knockoffs
