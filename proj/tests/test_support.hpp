#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "knockoffs/autodiff.hpp"

namespace knockoffs::testing {

// Central finite difference of a scalar-valued function of one tensor leaf.
// Used as the independent oracle for every analytic gradient check: the
// forward function is re-run from scratch for each probe, so it cannot share
// state with the backward pass it is checking.
inline Tensor finite_difference(
    const std::function<double(const Tensor&)>& f, const Tensor& x,
    double step = 1e-5) {
  Tensor grad = Tensor::zeros(x.shape());
  auto g = grad.mutable_data();
  for (std::int64_t i = 0; i < x.size(); ++i) {
    Tensor hi = x.clone();
    Tensor lo = x.clone();
    hi.mutable_data()[static_cast<std::size_t>(i)] += step;
    lo.mutable_data()[static_cast<std::size_t>(i)] -= step;
    g[static_cast<std::size_t>(i)] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return grad;
}

// Largest relative error between analytic and numeric gradients. Entries
// far below the gradient's own scale are compared against a floor instead:
// the central-difference probe is only accurate to ~|f|*1e-16/step in
// absolute terms, so their raw ratios would measure probe noise.
inline double max_rel_error(const Tensor& analytic, const Tensor& numeric,
                            double floor = 1e-5) {
  double scale = 0.0;
  for (std::int64_t i = 0; i < analytic.size(); ++i)
    scale = std::max(scale, std::abs(analytic[i]));
  const double eff_floor = std::max(floor, 1e-4 * scale);
  double worst = 0.0;
  for (std::int64_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double b = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(b), eff_floor});
    worst = std::max(worst, std::abs(a - b) / denom);
  }
  return worst;
}

}  // namespace knockoffs::testing
