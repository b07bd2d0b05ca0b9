#include "knockoffs/statistics.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <fstream>

#include "knockoffs/errors.hpp"
#include "knockoffs/matrix_io.hpp"

namespace knockoffs {

namespace {

// Order-independent mean: pairwise summation keeps round-off bounded no
// matter how per-sample work was sharded upstream.
double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

double pairwise_mean(std::span<const double> v) {
  return pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace

std::uint64_t augmented_data_hash(const Tensor& x, const Tensor& xk) {
  auto a = x.data();
  std::uint64_t h = fnv1a64(a.data(), a.size() * sizeof(double));
  auto b = xk.data();
  return fnv1a64(b.data(), b.size() * sizeof(double), h);
}

KnockoffStatistics gradient_statistics(const FilterNetwork& net,
                                       const Tensor& x, const Tensor& xk,
                                       const std::vector<double>& y) {
  if (!x.same_shape(xk))
    throw DataError("gradient_statistics: shape mismatch");
  const std::int64_t n = x.rows(), p = x.cols();
  if (static_cast<std::int64_t>(y.size()) != n)
    throw DataError("gradient_statistics: response length mismatch");

  Var xv = make_leaf(x);
  Var kv = make_leaf(xk);
  Var pred = net.forward(xv, kv, /*train=*/false);
  Tensor target = Tensor::from_data({n, 1}, std::vector<double>(y));
  // Sum reduction keeps each row's gradient equal to dL_i/dx_i.
  Var loss = net.loss_kind() == LossKind::kSquaredError
                 ? sse_loss(pred, target)
                 : bce_logits_loss(pred, target, /*mean=*/false);
  backward(loss);

  const Tensor& gx = xv.grad();
  const Tensor& gk = kv.grad();
  if (!gx.all_finite() || !gk.all_finite())
    throw NumericalError("gradient_statistics: non-finite gradient");

  KnockoffStatistics stats;
  stats.method = StatisticMethod::kGradient;
  stats.model_hash = net.param_hash();
  stats.data_hash = augmented_data_hash(x, xk);
  stats.w.resize(static_cast<std::size_t>(p));
  std::vector<double> col_x(static_cast<std::size_t>(n)),
      col_k(static_cast<std::size_t>(n));
  for (std::int64_t j = 0; j < p; ++j) {
    for (std::int64_t i = 0; i < n; ++i) {
      col_x[static_cast<std::size_t>(i)] = std::abs(gx.at(i, j));
      col_k[static_cast<std::size_t>(i)] = std::abs(gk.at(i, j));
    }
    stats.w[static_cast<std::size_t>(j)] =
        pairwise_mean(col_x) - pairwise_mean(col_k);
  }
  return stats;
}

KnockoffStatistics filter_statistics(const FilterNetwork& net) {
  const std::vector<Tensor> weights = net.linear_weights();
  if (weights.empty()) throw DataError("filter_statistics: untrained network");

  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>;
  // Product of the linear maps only; layer norms and activations do not
  // enter the effective weight.
  Mat acc = Eigen::Map<const Mat>(weights[0].data().data(), weights[0].rows(),
                                  weights[0].cols());
  for (std::size_t l = 1; l < weights.size(); ++l)
    acc = acc * Eigen::Map<const Mat>(weights[l].data().data(),
                                      weights[l].rows(), weights[l].cols());
  if (acc.cols() != 1)
    throw DataError("filter_statistics: network head is not scalar");

  const Tensor& z = net.filter_z().value();
  const Tensor& zk = net.filter_zk().value();
  KnockoffStatistics stats;
  stats.method = StatisticMethod::kFilter;
  stats.model_hash = net.param_hash();
  const std::int64_t p = net.features();
  stats.w.resize(static_cast<std::size_t>(p));
  for (std::int64_t j = 0; j < p; ++j) {
    const double s = std::abs(z[j]) + std::abs(zk[j]);
    const double a = s > 0.0 ? z[j] / s : 0.0;
    const double b = s > 0.0 ? zk[j] / s : 0.0;
    const double w_eff = acc(j, 0);
    const double za = w_eff * a, zb = w_eff * b;
    stats.w[static_cast<std::size_t>(j)] = za * za - zb * zb;
  }
  return stats;
}

const char* statistic_method_name(StatisticMethod m) {
  return m == StatisticMethod::kGradient ? "gradient" : "filter";
}

void write_statistics_csv(const KnockoffStatistics& stats,
                          const std::vector<std::string>& names,
                          const std::filesystem::path& path) {
  if (names.size() != stats.w.size())
    throw DataError("write_statistics_csv: name count mismatch");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "feature,w,method\n";
  for (std::size_t j = 0; j < stats.w.size(); ++j)
    out << names[j] << ',' << format_double(stats.w[j]) << ','
        << statistic_method_name(stats.method) << '\n';
}

void write_statistics_json(const KnockoffStatistics& stats,
                           const std::vector<std::string>& names,
                           const std::filesystem::path& path) {
  if (names.size() != stats.w.size())
    throw DataError("write_statistics_json: name count mismatch");
  nlohmann::json j{{"method", statistic_method_name(stats.method)},
                   {"model_hash", stats.model_hash},
                   {"data_hash", stats.data_hash}};
  j["features"] = names;
  j["w"] = stats.w;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace knockoffs
