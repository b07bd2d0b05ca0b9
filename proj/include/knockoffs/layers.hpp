#pragma once

#include <optional>

#include "knockoffs/autodiff.hpp"

namespace knockoffs {

constexpr double kNormEps = 1e-5;

// ---- building blocks used by the networks ----

Var linear(const Var& x, const Var& weight, const Var& bias);

// gamma(t) * LN(x) + beta(t), with gamma/beta projected from the aux (time)
// embedding through one linear layer whose output is [gamma | beta]. `group`
// is the number of consecutive rows of x sharing one aux row (tokens per
// sample).
Var cond_layer_norm(const Var& x, const Var& aux, const Var& mod_weight,
                    const Var& mod_bias, std::int64_t group,
                    double eps = kNormEps);

Var self_attention(const Var& x, const Var& qkv_weight, const Var& qkv_bias,
                   const Var& out_weight, const Var& out_bias,
                   std::int64_t batch, std::int64_t tokens,
                   std::int64_t heads);

// ---- spec-driven single-layer dispatch ----

enum class LayerKind {
  kLinear,
  kLayerNorm,
  kCondLayerNorm,
  kRelu,
  kGelu,
  kElu,
  kTanh,
  kDropout,
  kSelfAttention,
};

struct LayerSpec {
  LayerKind kind;
  // linear
  Var weight, bias;
  // conditional layer norm
  Var mod_weight, mod_bias;
  std::int64_t group = 1;
  // self attention
  Var qkv_weight, qkv_bias, out_weight, out_bias;
  std::int64_t batch = 1, tokens = 1, heads = 1;
  // dropout
  double rate = 0.0;
  bool train = false;

  double eps = kNormEps;
  double elu_alpha = 1.0;
};

// Applies one layer. `aux` is required for conditional layer norm (the time
// embedding); `rng` for dropout in train mode. Output is recorded on the
// tape and checked finite.
Var layer_forward(const LayerSpec& spec, const Var& input,
                  const std::optional<Var>& aux = {},
                  RngStream* rng = nullptr);

}  // namespace knockoffs
