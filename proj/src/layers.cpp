#include "knockoffs/layers.hpp"

#include <cmath>

#include "knockoffs/errors.hpp"

namespace knockoffs {

Var linear(const Var& x, const Var& weight, const Var& bias) {
  Var y = matmul(x, weight);
  if (bias.defined()) y = add_rowvec(y, bias);
  return y;
}

Var cond_layer_norm(const Var& x, const Var& aux, const Var& mod_weight,
                    const Var& mod_bias, std::int64_t group, double eps) {
  const std::int64_t c = x.value().cols();
  Var ln = layer_norm_rows(x, eps);
  Var mod = linear(aux, mod_weight, mod_bias);  // (B, 2c)
  if (mod.value().cols() != 2 * c)
    throw std::invalid_argument("cond_layer_norm: modulation width mismatch");
  Var gamma = slice_cols(mod, 0, c);
  Var beta = slice_cols(mod, c, 2 * c);
  return add_grouped_rows(mul_grouped_rows(ln, gamma, group), beta, group);
}

Var self_attention(const Var& x, const Var& qkv_weight, const Var& qkv_bias,
                   const Var& out_weight, const Var& out_bias,
                   std::int64_t batch, std::int64_t tokens,
                   std::int64_t heads) {
  const std::int64_t d = x.value().cols();
  if (d % heads != 0)
    throw std::invalid_argument("self_attention: heads must divide width");
  const std::int64_t dh = d / heads;
  Var qkv = linear(x, qkv_weight, qkv_bias);  // (B*T, 3d)
  Var q = split_heads(slice_cols(qkv, 0, d), batch, tokens, heads);
  Var k = split_heads(slice_cols(qkv, d, 2 * d), batch, tokens, heads);
  Var v = split_heads(slice_cols(qkv, 2 * d, 3 * d), batch, tokens, heads);
  Var scores = scale(bmm(q, k, /*transpose_b=*/true),
                     1.0 / std::sqrt(static_cast<double>(dh)));
  Var attn = softmax_rows(scores);
  Var ctx = merge_heads(bmm(attn, v, /*transpose_b=*/false), batch, tokens,
                        heads);
  return linear(ctx, out_weight, out_bias);
}

Var layer_forward(const LayerSpec& spec, const Var& input,
                  const std::optional<Var>& aux, RngStream* rng) {
  Var out;
  switch (spec.kind) {
    case LayerKind::kLinear:
      out = linear(input, spec.weight, spec.bias);
      break;
    case LayerKind::kLayerNorm:
      out = layer_norm_rows(input, spec.eps);
      break;
    case LayerKind::kCondLayerNorm:
      if (!aux) throw std::invalid_argument("cond layer norm needs aux input");
      out = cond_layer_norm(input, *aux, spec.mod_weight, spec.mod_bias,
                            spec.group, spec.eps);
      break;
    case LayerKind::kRelu:
      out = relu(input);
      break;
    case LayerKind::kGelu:
      out = gelu(input);
      break;
    case LayerKind::kElu:
      out = elu(input, spec.elu_alpha);
      break;
    case LayerKind::kTanh:
      out = tanh_act(input);
      break;
    case LayerKind::kDropout:
      if (!spec.train) {
        out = input;  // identity in eval mode
        break;
      }
      if (rng == nullptr)
        throw std::invalid_argument("dropout in train mode needs an rng");
      out = dropout(input, spec.rate, *rng, true);
      break;
    case LayerKind::kSelfAttention:
      out = self_attention(input, spec.qkv_weight, spec.qkv_bias,
                           spec.out_weight, spec.out_bias, spec.batch,
                           spec.tokens, spec.heads);
      break;
  }
  if (!out.value().all_finite())
    throw NumericalError("layer_forward produced non-finite values");
  return out;
}

}  // namespace knockoffs
