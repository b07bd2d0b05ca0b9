#include "knockoffs/normalize.hpp"

#include <cmath>

#include "knockoffs/errors.hpp"

namespace knockoffs {

NormalizedMatrix normalize(const FeatureMatrix& data,
                           const NormalizeSpec& spec) {
  const std::int64_t n = data.n(), p = data.p();
  if (n == 0 || p == 0) throw DataError("normalize: empty matrix");

  Tensor out = data.values.clone();
  auto d = out.mutable_data();
  if (spec.log1p) {
    for (std::int64_t k = 0; k < out.size(); ++k) {
      if (d[static_cast<std::size_t>(k)] <= -1.0)
        throw DataError("normalize: log1p needs values > -1");
      d[static_cast<std::size_t>(k)] = std::log1p(d[static_cast<std::size_t>(k)]);
    }
  }

  NormalizedMatrix result;
  result.params.spec = spec;
  if (spec.standardize) {
    result.params.mean.resize(static_cast<std::size_t>(p));
    result.params.sd.resize(static_cast<std::size_t>(p));
    std::string degenerate;
    for (std::int64_t j = 0; j < p; ++j) {
      double m = 0.0;
      for (std::int64_t i = 0; i < n; ++i)
        m += d[static_cast<std::size_t>(i * p + j)];
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const double diff = d[static_cast<std::size_t>(i * p + j)] - m;
        v += diff * diff;
      }
      v /= static_cast<double>(n);
      result.params.mean[static_cast<std::size_t>(j)] = m;
      result.params.sd[static_cast<std::size_t>(j)] = std::sqrt(v);
      if (v == 0.0) {
        if (!degenerate.empty()) degenerate += ", ";
        degenerate += data.names[static_cast<std::size_t>(j)];
      }
    }
    if (!degenerate.empty())
      throw DataError("normalize: zero-variance columns: " + degenerate);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < p; ++j) {
        auto& cell = d[static_cast<std::size_t>(i * p + j)];
        cell = (cell - result.params.mean[static_cast<std::size_t>(j)]) /
               result.params.sd[static_cast<std::size_t>(j)];
      }
  }
  result.matrix = make_matrix(std::move(out), data.names);
  return result;
}

FeatureMatrix denormalize(const FeatureMatrix& data,
                          const NormalizeParams& params) {
  const std::int64_t n = data.n(), p = data.p();
  Tensor out = data.values.clone();
  auto d = out.mutable_data();
  if (params.spec.standardize) {
    if (params.mean.size() != static_cast<std::size_t>(p))
      throw DataError("denormalize: parameter width mismatch");
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < p; ++j) {
        auto& cell = d[static_cast<std::size_t>(i * p + j)];
        cell = cell * params.sd[static_cast<std::size_t>(j)] +
               params.mean[static_cast<std::size_t>(j)];
      }
  }
  if (params.spec.log1p)
    for (std::int64_t k = 0; k < out.size(); ++k)
      d[static_cast<std::size_t>(k)] = std::expm1(d[static_cast<std::size_t>(k)]);
  return make_matrix(std::move(out), data.names);
}

}  // namespace knockoffs
