#include "knockoffs/denoiser.hpp"

#include <cmath>

#include "knockoffs/errors.hpp"

namespace knockoffs {

namespace {

Var init_linear(std::int64_t fan_in, std::int64_t fan_out, RngStream& rng) {
  return make_leaf(Tensor::randn({fan_in, fan_out}, rng,
                                 1.0 / std::sqrt(static_cast<double>(fan_in))));
}

Var init_zeros(std::vector<std::int64_t> shape) {
  return make_leaf(Tensor::zeros(std::move(shape)));
}

// Modulation projections start at the identity modulation: zero weight,
// bias = [ones | zeros], so an untrained block applies plain layer norm.
Var init_mod_bias(std::int64_t width) {
  Tensor b = Tensor::zeros({2 * width});
  for (std::int64_t i = 0; i < width; ++i) b.mutable_data()[static_cast<std::size_t>(i)] = 1.0;
  return make_leaf(std::move(b));
}

// Token embedding: out[b*p + j, :] = x[b, j] * W[j, :] + P[j, :].
Var embed_tokens(const Tensor& x, const Var& w, const Var& pos) {
  const std::int64_t B = x.rows(), p = x.cols();
  const std::int64_t d = w.value().cols();
  Tensor out = Tensor::zeros({B * p, d});
  auto o = out.mutable_data();
  auto xd = x.data();
  auto wd = w.value().data();
  auto pd = pos.value().data();
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t j = 0; j < p; ++j) {
      const double xv = xd[static_cast<std::size_t>(b * p + j)];
      const auto row = static_cast<std::size_t>((b * p + j) * d);
      const auto src = static_cast<std::size_t>(j * d);
      for (std::int64_t k = 0; k < d; ++k)
        o[row + static_cast<std::size_t>(k)] =
            xv * wd[src + static_cast<std::size_t>(k)] + pd[src + static_cast<std::size_t>(k)];
    }
  Tensor x_copy = x;  // keep values alive for the backward closure
  return custom_op(std::move(out), {w, pos}, [x_copy, B, p, d](Node& n) {
    auto g = n.grad.data();
    auto xd = x_copy.data();
    if (n.parents[0]->requires_grad) {
      ensure_grad(*n.parents[0]);
      auto dw = n.parents[0]->grad.mutable_data();
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t j = 0; j < p; ++j) {
          const double xv = xd[static_cast<std::size_t>(b * p + j)];
          const auto row = static_cast<std::size_t>((b * p + j) * d);
          const auto dst = static_cast<std::size_t>(j * d);
          for (std::int64_t k = 0; k < d; ++k)
            dw[dst + static_cast<std::size_t>(k)] += xv * g[row + static_cast<std::size_t>(k)];
        }
    }
    if (n.parents[1]->requires_grad) {
      ensure_grad(*n.parents[1]);
      auto dp = n.parents[1]->grad.mutable_data();
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t j = 0; j < p; ++j) {
          const auto row = static_cast<std::size_t>((b * p + j) * d);
          const auto dst = static_cast<std::size_t>(j * d);
          for (std::int64_t k = 0; k < d; ++k)
            dp[dst + static_cast<std::size_t>(k)] += g[row + static_cast<std::size_t>(k)];
        }
    }
  });
}

}  // namespace

DenoiserModel::DenoiserModel(const DenoiserArch& arch, RngStream init)
    : arch_(arch) {
  if (arch.features < 1 || arch.layers < 1 || arch.width < 1 ||
      arch.heads < 1 || arch.width % arch.heads != 0)
    throw ConfigError("invalid denoiser architecture");
  const std::int64_t p = arch.features, d = arch.width;
  const std::int64_t f = arch.ffn_mult * d;

  embed_w_ = make_leaf(Tensor::randn({p, d}, init));
  pos_ = make_leaf(Tensor::randn({p, d}, init, 0.1));
  time1_w_ = init_linear(d, d, init);
  time1_b_ = init_zeros({d});
  time2_w_ = init_linear(d, d, init);
  time2_b_ = init_zeros({d});

  blocks_.resize(static_cast<std::size_t>(arch.layers));
  for (auto& blk : blocks_) {
    blk.attn_mod_w = init_zeros({d, 2 * d});
    blk.attn_mod_b = init_mod_bias(d);
    blk.qkv_w = init_linear(d, 3 * d, init);
    blk.qkv_b = init_zeros({3 * d});
    blk.out_w = init_linear(d, d, init);
    blk.out_b = init_zeros({d});
    blk.ffn_mod_w = init_zeros({d, 2 * d});
    blk.ffn_mod_b = init_mod_bias(d);
    blk.ffn1_w = init_linear(d, f, init);
    blk.ffn1_b = init_zeros({f});
    blk.ffn2_w = init_linear(f, d, init);
    blk.ffn2_b = init_zeros({d});
  }
  final_gamma_ = make_leaf(Tensor::full({d}, 1.0));
  final_beta_ = init_zeros({d});
  head_w_ = init_linear(d, 1, init);
  head_b_ = init_zeros({1});
  register_params();
}

void DenoiserModel::register_params() {
  params_.clear();
  params_.push_back({"embed_w", embed_w_});
  params_.push_back({"pos", pos_});
  params_.push_back({"time1_w", time1_w_});
  params_.push_back({"time1_b", time1_b_});
  params_.push_back({"time2_w", time2_w_});
  params_.push_back({"time2_b", time2_b_});
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string prefix = "block" + std::to_string(l) + ".";
    Block& b = blocks_[l];
    params_.push_back({prefix + "attn_mod_w", b.attn_mod_w});
    params_.push_back({prefix + "attn_mod_b", b.attn_mod_b});
    params_.push_back({prefix + "qkv_w", b.qkv_w});
    params_.push_back({prefix + "qkv_b", b.qkv_b});
    params_.push_back({prefix + "out_w", b.out_w});
    params_.push_back({prefix + "out_b", b.out_b});
    params_.push_back({prefix + "ffn_mod_w", b.ffn_mod_w});
    params_.push_back({prefix + "ffn_mod_b", b.ffn_mod_b});
    params_.push_back({prefix + "ffn1_w", b.ffn1_w});
    params_.push_back({prefix + "ffn1_b", b.ffn1_b});
    params_.push_back({prefix + "ffn2_w", b.ffn2_w});
    params_.push_back({prefix + "ffn2_b", b.ffn2_b});
  }
  params_.push_back({"final_gamma", final_gamma_});
  params_.push_back({"final_beta", final_beta_});
  params_.push_back({"head_w", head_w_});
  params_.push_back({"head_b", head_b_});
}

Tensor DenoiserModel::time_features(const std::vector<std::int64_t>& t) const {
  const std::int64_t d = arch_.width;
  const std::int64_t half = d / 2;
  Tensor enc = Tensor::zeros({static_cast<std::int64_t>(t.size()), d});
  auto e = enc.mutable_data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::int64_t k = 0; k < half; ++k) {
      const double freq =
          std::exp(-std::log(10000.0) * static_cast<double>(k) /
                   static_cast<double>(half));
      const double angle = static_cast<double>(t[i]) * freq;
      e[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(2 * k)] = std::sin(angle);
      e[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(2 * k + 1)] = std::cos(angle);
    }
  }
  return enc;
}

Var DenoiserModel::forward(const Tensor& x,
                           const std::vector<std::int64_t>& t) const {
  const std::int64_t B = x.rows(), p = x.cols(), d = arch_.width;
  if (p != arch_.features)
    throw DataError("denoiser: input width does not match architecture");
  if (static_cast<std::int64_t>(t.size()) != B)
    throw DataError("denoiser: one timestep per batch row required");

  Var temb = linear(make_const(time_features(t)), time1_w_, time1_b_);
  temb = linear(gelu(temb), time2_w_, time2_b_);  // (B, d)

  Var h = embed_tokens(x, embed_w_, pos_);  // (B*p, d)
  for (const Block& blk : blocks_) {
    Var a = cond_layer_norm(h, temb, blk.attn_mod_w, blk.attn_mod_b, p);
    h = add(h, self_attention(a, blk.qkv_w, blk.qkv_b, blk.out_w, blk.out_b,
                              B, p, arch_.heads));
    Var f = cond_layer_norm(h, temb, blk.ffn_mod_w, blk.ffn_mod_b, p);
    Var ff = linear(gelu(linear(f, blk.ffn1_w, blk.ffn1_b)), blk.ffn2_w,
                    blk.ffn2_b);
    h = add(h, ff);
  }
  Var g = affine_rows(layer_norm_rows(h, kNormEps), final_gamma_, final_beta_);
  Var out = linear(g, head_w_, head_b_);  // (B*p, 1)
  return reshape(out, {B, p});
}

std::uint64_t DenoiserModel::param_hash() const { return params_hash(params_); }

}  // namespace knockoffs
