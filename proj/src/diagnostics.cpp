#include "knockoffs/diagnostics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "knockoffs/errors.hpp"
#include "knockoffs/matrix_io.hpp"
#include "knockoffs/rng.hpp"

namespace knockoffs {

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("ks_statistic: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double sup = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / na -
                                 static_cast<double>(j) / nb));
  }
  return sup;
}

namespace {

// Pearson correlation matrix of the columns; zero-variance columns
// correlate as 0 off-diagonal and 1 with themselves.
Tensor correlation_matrix(const Tensor& x) {
  const std::int64_t n = x.rows(), p = x.cols();
  std::vector<double> mean(static_cast<std::size_t>(p), 0.0);
  std::vector<double> sd(static_cast<std::size_t>(p), 0.0);
  for (std::int64_t j = 0; j < p; ++j) {
    double m = 0.0;
    for (std::int64_t i = 0; i < n; ++i) m += x.at(i, j);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double d = x.at(i, j) - m;
      v += d * d;
    }
    mean[static_cast<std::size_t>(j)] = m;
    sd[static_cast<std::size_t>(j)] = std::sqrt(v);
  }
  Tensor corr = Tensor::zeros({p, p});
  auto c = corr.mutable_data();
  for (std::int64_t a = 0; a < p; ++a) {
    c[static_cast<std::size_t>(a * p + a)] = 1.0;
    for (std::int64_t b = a + 1; b < p; ++b) {
      double s = 0.0;
      for (std::int64_t i = 0; i < n; ++i)
        s += (x.at(i, a) - mean[static_cast<std::size_t>(a)]) *
             (x.at(i, b) - mean[static_cast<std::size_t>(b)]);
      const double denom =
          sd[static_cast<std::size_t>(a)] * sd[static_cast<std::size_t>(b)];
      const double r = denom > 0.0 ? s / denom : 0.0;
      c[static_cast<std::size_t>(a * p + b)] = r;
      c[static_cast<std::size_t>(b * p + a)] = r;
    }
  }
  return corr;
}

double column_corr(const Tensor& x, const Tensor& y, std::int64_t j) {
  const std::int64_t n = x.rows();
  double mx = 0, my = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    mx += x.at(i, j);
    my += y.at(i, j);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double dx = x.at(i, j) - mx, dy = y.at(i, j) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double denom = std::sqrt(sxx * syy);
  return denom > 0.0 ? sxy / denom : 0.0;
}

}  // namespace

KnockoffQualityReport quality_report(const Tensor& x, const Tensor& xk,
                                     int swap_trials, std::uint64_t seed) {
  if (!x.same_shape(xk)) throw DataError("quality_report: shape mismatch");
  const std::int64_t n = x.rows(), p = x.cols();

  KnockoffQualityReport report;
  report.ks.reserve(static_cast<std::size_t>(p));
  report.cross_corr.reserve(static_cast<std::size_t>(p));
  std::vector<double> col_x(static_cast<std::size_t>(n)),
      col_k(static_cast<std::size_t>(n));
  for (std::int64_t j = 0; j < p; ++j) {
    for (std::int64_t i = 0; i < n; ++i) {
      col_x[static_cast<std::size_t>(i)] = x.at(i, j);
      col_k[static_cast<std::size_t>(i)] = xk.at(i, j);
    }
    report.ks.push_back(ks_statistic(col_x, col_k));
    report.cross_corr.push_back(column_corr(x, xk, j));
  }
  report.delta_hat = *std::max_element(report.ks.begin(), report.ks.end());

  report.corr_x = correlation_matrix(x);
  report.corr_xk = correlation_matrix(xk);
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::int64_t a = 0; a < p; ++a)
    for (std::int64_t b = 0; b < p; ++b) {
      if (a == b) continue;
      const double d = std::abs(report.corr_x.at(a, b) - report.corr_xk.at(a, b));
      report.max_corr_diff = std::max(report.max_corr_diff, d);
      sum += d;
      ++count;
    }
  report.mean_corr_diff = count > 0 ? sum / static_cast<double>(count) : 0.0;

  // Swap probes on the augmented correlation structure.
  Tensor aug = Tensor::zeros({n, 2 * p});
  auto ad = aug.mutable_data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < p; ++j) {
      ad[static_cast<std::size_t>(i * 2 * p + j)] = x.at(i, j);
      ad[static_cast<std::size_t>(i * 2 * p + p + j)] = xk.at(i, j);
    }
  const Tensor base_corr = correlation_matrix(aug);
  RngStream rng = RngStream(seed).derive("swap-check");
  for (int trial = 0; trial < swap_trials; ++trial) {
    Tensor swapped = aug.clone();
    auto sd = swapped.mutable_data();
    for (std::int64_t j = 0; j < p; ++j) {
      if (rng.uniform() >= 0.5) continue;
      for (std::int64_t i = 0; i < n; ++i)
        std::swap(sd[static_cast<std::size_t>(i * 2 * p + j)],
                  sd[static_cast<std::size_t>(i * 2 * p + p + j)]);
    }
    const Tensor swapped_corr = correlation_matrix(swapped);
    double worst = 0.0;
    for (std::int64_t k = 0; k < base_corr.size(); ++k)
      worst = std::max(worst, std::abs(base_corr[k] - swapped_corr[k]));
    report.swap_diffs.push_back(worst);
    report.swap_max_diff = std::max(report.swap_max_diff, worst);
  }
  return report;
}

double distance_correlation(std::span<const double> a,
                            std::span<const double> b) {
  if (a.size() != b.size())
    throw DataError("distance_correlation: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw DataError("distance_correlation: need at least 2 points");

  auto centered = [n](std::span<const double> v) {
    std::vector<double> d(n * n);
    std::vector<double> row_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double dist = std::abs(v[i] - v[j]);
        d[i * n + j] = dist;
        row_mean[i] += dist;
      }
    for (std::size_t i = 0; i < n; ++i) {
      grand += row_mean[i];
      row_mean[i] /= static_cast<double>(n);
    }
    grand /= static_cast<double>(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        d[i * n + j] += grand - row_mean[i] - row_mean[j];
    return d;
  };

  const std::vector<double> A = centered(a);
  const std::vector<double> B = centered(b);
  double dcov = 0.0, dvar_a = 0.0, dvar_b = 0.0;
  for (std::size_t k = 0; k < A.size(); ++k) {
    dcov += A[k] * B[k];
    dvar_a += A[k] * A[k];
    dvar_b += B[k] * B[k];
  }
  const double denom = std::sqrt(dvar_a) * std::sqrt(dvar_b);
  if (denom <= 0.0) return 0.0;  // constant input convention
  const double ratio = dcov / denom;
  return ratio > 0.0 ? std::sqrt(ratio) : 0.0;
}

std::vector<std::int64_t> screen_features(const Tensor& x,
                                          const std::vector<double>& y,
                                          std::int64_t keep) {
  const std::int64_t n = x.rows(), p = x.cols();
  if (keep < 1 || keep > p)
    throw ConfigError("screen_features: keep count out of range");
  if (static_cast<std::int64_t>(y.size()) != n)
    throw DataError("screen_features: response length mismatch");

  std::vector<double> col(static_cast<std::size_t>(n));
  std::vector<std::pair<double, std::int64_t>> scored;
  scored.reserve(static_cast<std::size_t>(p));
  for (std::int64_t j = 0; j < p; ++j) {
    for (std::int64_t i = 0; i < n; ++i)
      col[static_cast<std::size_t>(i)] = x.at(i, j);
    scored.emplace_back(distance_correlation(col, y), j);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(keep));
  for (std::int64_t k = 0; k < keep; ++k)
    out.push_back(scored[static_cast<std::size_t>(k)].second);
  std::sort(out.begin(), out.end());
  return out;
}

void write_quality_report_json(const KnockoffQualityReport& report,
                               const std::vector<std::string>& names,
                               const std::filesystem::path& path) {
  nlohmann::json j{{"delta_hat", report.delta_hat},
                   {"max_corr_diff", report.max_corr_diff},
                   {"mean_corr_diff", report.mean_corr_diff},
                   {"swap_max_diff", report.swap_max_diff}};
  j["features"] = names;
  j["ks"] = report.ks;
  j["cross_corr"] = report.cross_corr;
  j["swap_diffs"] = report.swap_diffs;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_quality_report_csv(const KnockoffQualityReport& report,
                              const std::vector<std::string>& names,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "kind,feature_a,feature_b,value\n";
  for (std::size_t j = 0; j < names.size(); ++j) {
    out << "ks," << names[j] << ",," << format_double(report.ks[j]) << '\n';
    out << "cross_corr," << names[j] << ",,"
        << format_double(report.cross_corr[j]) << '\n';
  }
  const std::int64_t p = report.corr_x.rows();
  for (std::int64_t a = 0; a < p; ++a)
    for (std::int64_t b = 0; b < p; ++b)
      out << "corr_diff," << names[static_cast<std::size_t>(a)] << ','
          << names[static_cast<std::size_t>(b)] << ','
          << format_double(report.corr_x.at(a, b) - report.corr_xk.at(a, b))
          << '\n';
}

}  // namespace knockoffs
