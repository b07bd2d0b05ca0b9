#pragma once

#include <span>
#include <string>
#include <vector>

#include "knockoffs/autodiff.hpp"

namespace knockoffs {

struct Param {
  std::string name;
  Var var;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW); 0 gives plain Adam
  double clip_norm = 0.0;     // global-norm clip before moments; 0 = off
};

// Adam / AdamW with global gradient-norm clipping. Moment buffers are laid
// out to match the parameter list given on the first step; the list must
// keep its order afterwards.
class AdamW {
 public:
  explicit AdamW(AdamConfig cfg) : cfg_(cfg), lr_(cfg.lr) {}

  // Applies one update from the gradients currently held by the params,
  // then zeroes those gradients.
  void step(std::span<Param> params);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  double lr_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Cosine anneal from `base` down to 1% of it across `total` epochs.
double cosine_lr(double base, std::int64_t epoch, std::int64_t total);

// Fingerprint over parameter names and values (FNV-1a).
std::uint64_t params_hash(const std::vector<Param>& params);

}  // namespace knockoffs
