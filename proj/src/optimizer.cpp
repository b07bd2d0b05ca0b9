#include "knockoffs/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "knockoffs/errors.hpp"

namespace knockoffs {

void AdamW::step(std::span<Param> params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Param& p : params) {
      m_.push_back(Tensor::zeros(p.var.value().shape()));
      v_.push_back(Tensor::zeros(p.var.value().shape()));
    }
  }
  if (m_.size() != params.size())
    throw std::logic_error("optimizer: parameter list changed size");

  double sq = 0.0;
  for (const Param& p : params) sq += p.var.grad().squared_norm();
  const double norm = std::sqrt(sq);
  double clip_scale = 1.0;
  if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm)
    clip_scale = cfg_.clip_norm / norm;
  if (!std::isfinite(norm * clip_scale))
    throw NumericalError("optimizer: non-finite gradient after clipping");

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = params[k];
    Tensor value = p.var.value().clone();
    auto w = value.mutable_data();
    auto g = p.var.grad().data();
    auto m = m_[k].mutable_data();
    auto v = v_[k].mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * clip_scale;
      if (!std::isfinite(gi))
        throw NumericalError("optimizer: non-finite gradient after clipping");
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr_ * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                     cfg_.weight_decay * w[i]);
    }
    p.var.set_value(std::move(value));
    p.var.zero_grad();
  }
}

std::uint64_t params_hash(const std::vector<Param>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Param& p : params) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    auto d = p.var.value().data();
    h = fnv1a64(d.data(), d.size() * sizeof(double), h);
  }
  return h;
}

double cosine_lr(double base, std::int64_t epoch, std::int64_t total) {
  const double floor = 0.01 * base;
  if (total <= 1) return base;
  const double frac =
      static_cast<double>(epoch) / static_cast<double>(total - 1);
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace knockoffs
