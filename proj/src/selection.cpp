#include "knockoffs/selection.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "knockoffs/errors.hpp"
#include "knockoffs/matrix_io.hpp"

namespace knockoffs {

SelectionResult knockoff_plus_select(const std::vector<double>& w, double q) {
  if (w.empty()) throw DataError("knockoff_plus_select: empty statistics");
  if (!(q > 0.0 && q < 1.0))
    throw ConfigError("knockoff_plus_select: q must lie in (0, 1)");
  for (double v : w)
    if (!std::isfinite(v))
      throw NumericalError("knockoff_plus_select: non-finite statistic");

  // Candidate thresholds are the distinct nonzero magnitudes, scanned
  // ascending so the first hit is the minimal feasible tau.
  std::vector<double> candidates;
  candidates.reserve(w.size());
  for (double v : w)
    if (v != 0.0) candidates.push_back(std::abs(v));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  SelectionResult result;
  result.q = q;
  for (double t : candidates) {
    std::int64_t neg = 0, pos = 0;
    for (double v : w) {
      if (v <= -t) ++neg;
      if (v >= t) ++pos;
    }
    const double fdp_hat = static_cast<double>(1 + neg) /
                           static_cast<double>(std::max<std::int64_t>(pos, 1));
    if (fdp_hat <= q) {
      result.tau = t;
      result.estimated_fdp = fdp_hat;
      for (std::size_t j = 0; j < w.size(); ++j)
        if (w[j] >= t) result.selected.push_back(static_cast<std::int64_t>(j));
      return result;
    }
  }
  return result;  // tau = +inf, nothing selected
}

SelectionResult knockoff_plus_select(const KnockoffStatistics& stats,
                                     double q) {
  return knockoff_plus_select(stats.w, q);
}

SelectionQuality evaluate_selection(const std::vector<std::int64_t>& selected,
                                    const std::vector<std::int64_t>& truth) {
  if (truth.empty())
    throw DataError("evaluate_selection: power is undefined for empty truth");
  std::unordered_set<std::int64_t> truth_set(truth.begin(), truth.end());
  std::int64_t hits = 0;
  for (std::int64_t j : selected)
    if (truth_set.count(j)) ++hits;
  SelectionQuality out;
  out.power = static_cast<double>(hits) / static_cast<double>(truth_set.size());
  out.fdp = static_cast<double>(static_cast<std::int64_t>(selected.size()) - hits) /
            static_cast<double>(std::max<std::size_t>(selected.size(), 1));
  return out;
}

void write_selection_json(const SelectionResult& result,
                          const std::vector<std::string>& names,
                          const std::filesystem::path& path) {
  nlohmann::json j;
  j["tau"] = std::isfinite(result.tau) ? nlohmann::json(result.tau)
                                       : nlohmann::json("inf");
  j["q"] = result.q;
  j["estimated_fdp"] = result.estimated_fdp;
  j["selected_indices"] = result.selected;
  nlohmann::json sel_names = nlohmann::json::array();
  for (std::int64_t idx : result.selected)
    sel_names.push_back(names.at(static_cast<std::size_t>(idx)));
  j["selected_names"] = sel_names;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace knockoffs
