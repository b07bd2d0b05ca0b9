#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "knockoffs/statistics.hpp"

namespace knockoffs {

struct SelectionResult {
  double tau = std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> selected;  // ascending indices with W_j >= tau
  double estimated_fdp = 0.0;          // (1 + #{W <= -tau}) / max(#{W >= tau}, 1)
  double q = 0.0;
};

// Knockoff+ threshold: the smallest candidate t in {|W_j| : W_j != 0} with
// (1 + #{j: W_j <= -t}) / max(#{j: W_j >= t}, 1) <= q. No qualifying
// candidate leaves the selection empty with tau = +inf. Zero statistics are
// never selected.
SelectionResult knockoff_plus_select(const KnockoffStatistics& stats,
                                     double q);
SelectionResult knockoff_plus_select(const std::vector<double>& w, double q);

struct SelectionQuality {
  double power = 0.0;
  double fdp = 0.0;
};

// power = |selected ∩ truth| / |truth|; fdp = |selected \ truth| /
// max(|selected|, 1). Empty truth has no defined power and raises.
SelectionQuality evaluate_selection(const std::vector<std::int64_t>& selected,
                                    const std::vector<std::int64_t>& truth);

void write_selection_json(const SelectionResult& result,
                          const std::vector<std::string>& names,
                          const std::filesystem::path& path);

}  // namespace knockoffs
