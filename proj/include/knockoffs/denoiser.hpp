#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "knockoffs/layers.hpp"
#include "knockoffs/optimizer.hpp"

namespace knockoffs {

// Transformer denoiser over feature tokens: each scalar feature is embedded
// to `width` dims with a learned per-feature weight plus a learned position
// embedding, so attention runs across the p features of one sample.
struct DenoiserArch {
  std::int64_t features = 0;  // p
  std::int64_t layers = 6;
  std::int64_t width = 256;
  std::int64_t heads = 8;
  std::int64_t ffn_mult = 2;

  bool operator==(const DenoiserArch&) const = default;
};

class DenoiserModel {
 public:
  DenoiserModel() = default;
  DenoiserModel(const DenoiserArch& arch, RngStream init);

  // Predicted noise for a batch: x is (B, p), t holds one timestep per row.
  // Pure w.r.t. model state; safe to call concurrently under NoGradGuard.
  Var forward(const Tensor& x, const std::vector<std::int64_t>& t) const;

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  const DenoiserArch& arch() const { return arch_; }

  // Sinusoidal encoding of integer timesteps, one row per entry.
  Tensor time_features(const std::vector<std::int64_t>& t) const;

  std::uint64_t param_hash() const;

 private:
  struct Block {
    Var attn_mod_w, attn_mod_b;
    Var qkv_w, qkv_b, out_w, out_b;
    Var ffn_mod_w, ffn_mod_b;
    Var ffn1_w, ffn1_b, ffn2_w, ffn2_b;
  };

  DenoiserArch arch_;
  Var embed_w_, pos_;          // (p, d) each
  Var time1_w_, time1_b_, time2_w_, time2_b_;
  std::vector<Block> blocks_;
  Var final_gamma_, final_beta_;
  Var head_w_, head_b_;
  std::vector<Param> params_;

  void register_params();
};

}  // namespace knockoffs
