#include <doctest.h>

#include <cmath>

#include "knockoffs/layers.hpp"
#include "test_support.hpp"

using namespace knockoffs;
using knockoffs::testing::finite_difference;
using knockoffs::testing::max_rel_error;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, std::uint64_t seed,
                     double sd = 1.0) {
  RngStream rng(seed);
  return Tensor::randn(std::move(shape), rng, sd);
}

}  // namespace

TEST_CASE("layer norm maps [1, 3] to [-1, 1]") {
  LayerSpec spec{.kind = LayerKind::kLayerNorm};
  Var out = layer_forward(spec, make_const(Tensor::from_data({1, 2}, {1.0, 3.0})));
  CHECK(out.value()[0] == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(out.value()[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("layer norm output has zero mean, unit variance per row") {
  Tensor x = random_tensor({8, 16}, 7, 3.0);
  Var out = layer_norm_rows(make_const(x), kNormEps);
  for (std::int64_t r = 0; r < 8; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::int64_t c = 0; c < 16; ++c) mean += out.value().at(r, c);
    mean /= 16.0;
    for (std::int64_t c = 0; c < 16; ++c) {
      const double d = out.value().at(r, c) - mean;
      var += d * d;
    }
    var /= 16.0;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("conditional layer norm with identity modulation is plain LN") {
  const std::int64_t c = 6, group = 3;
  Tensor x = random_tensor({6, c}, 17);
  Tensor aux = random_tensor({2, 4}, 18);  // two samples, 3 tokens each
  // Zero projection weight, bias = [ones | zeros] makes gamma=1, beta=0.
  Tensor wmod = Tensor::zeros({4, 2 * c});
  Tensor bmod = Tensor::zeros({2 * c});
  for (std::int64_t j = 0; j < c; ++j) bmod.mutable_data()[j] = 1.0;

  Var got = cond_layer_norm(make_const(x), make_const(aux), make_const(wmod),
                            make_const(bmod), group);
  Var want = layer_norm_rows(make_const(x), kNormEps);
  for (std::int64_t i = 0; i < x.size(); ++i)
    CHECK(got.value()[i] == doctest::Approx(want.value()[i]).epsilon(1e-12));
}

TEST_CASE("single-token self-attention with identity projections is identity") {
  const std::int64_t d = 4;
  Tensor x = random_tensor({1, d}, 23);  // one sample, one token
  Tensor wqkv = Tensor::zeros({d, 3 * d});
  for (std::int64_t i = 0; i < d; ++i)
    for (int blk = 0; blk < 3; ++blk)
      wqkv.mutable_data()[static_cast<std::size_t>(i * 3 * d + blk * d + i)] = 1.0;
  Tensor wout = Tensor::zeros({d, d});
  for (std::int64_t i = 0; i < d; ++i)
    wout.mutable_data()[static_cast<std::size_t>(i * d + i)] = 1.0;

  Var out = self_attention(make_const(x), make_const(wqkv),
                           make_const(Tensor::zeros({3 * d})),
                           make_const(wout), make_const(Tensor::zeros({d})),
                           /*batch=*/1, /*tokens=*/1, /*heads=*/1);
  // Softmax over a single key puts weight 1 on it, so the token passes
  // through untouched.
  for (std::int64_t i = 0; i < d; ++i)
    CHECK(out.value()[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

namespace {

// Builds a random spec of each kind over a (batch*tokens, d) input and
// FD-checks the input gradient of sum(out^2).
void check_layer_gradient(LayerKind kind) {
  const std::int64_t batch = 2, tokens = 3, d = 8, heads = 2, aux_d = 5;
  Tensor x0 = random_tensor({batch * tokens, d}, 1000 + static_cast<int>(kind));
  Tensor aux0 = random_tensor({batch, aux_d}, 2000 + static_cast<int>(kind));

  LayerSpec spec{.kind = kind};
  spec.group = tokens;
  spec.batch = batch;
  spec.tokens = tokens;
  spec.heads = heads;
  spec.eps = kNormEps;
  spec.rate = 0.3;
  spec.weight = make_const(random_tensor({d, d}, 31, 0.5));
  spec.bias = make_const(random_tensor({d}, 32, 0.1));
  spec.mod_weight = make_const(random_tensor({aux_d, 2 * d}, 33, 0.3));
  spec.mod_bias = make_const(random_tensor({2 * d}, 34, 0.1));
  spec.qkv_weight = make_const(random_tensor({d, 3 * d}, 35, 0.4));
  spec.qkv_bias = make_const(random_tensor({3 * d}, 36, 0.1));
  spec.out_weight = make_const(random_tensor({d, d}, 37, 0.4));
  spec.out_bias = make_const(random_tensor({d}, 38, 0.1));
  spec.train = kind == LayerKind::kDropout;

  Var aux = make_const(aux0);
  // Random output weights keep the loss sensitive to x for normalization
  // layers, whose raw sum of squares is nearly input-invariant.
  Var lw = make_const(random_tensor({batch * tokens, d},
                                    3000 + static_cast<int>(kind)));
  auto forward = [&](const Tensor& xin) {
    NoGradGuard ng;
    RngStream rng(777);  // fixed mask across FD probes
    Var out = mul(layer_forward(spec, make_const(xin), aux, &rng), lw);
    return sum_all(mul(out, out)).value()[0];
  };

  RngStream rng(777);
  Var x = make_leaf(x0);
  Var out = mul(layer_forward(spec, x, aux, &rng), lw);
  backward(sum_all(mul(out, out)));

  Tensor fd = finite_difference(forward, x0, 1e-6);
  CHECK(max_rel_error(x.grad(), fd) < 1e-4);
}

}  // namespace

TEST_CASE("every layer kind passes the finite-difference gradient check") {
  for (LayerKind kind :
       {LayerKind::kLinear, LayerKind::kLayerNorm, LayerKind::kCondLayerNorm,
        LayerKind::kRelu, LayerKind::kGelu, LayerKind::kElu, LayerKind::kTanh,
        LayerKind::kDropout, LayerKind::kSelfAttention}) {
    check_layer_gradient(kind);
  }
}

TEST_CASE("identical seeds give bit-identical forward and backward") {
  auto run = [](std::uint64_t seed) {
    RngStream init(seed);
    Tensor w = Tensor::randn({6, 6}, init, 0.4);
    Tensor x0 = Tensor::randn({4, 6}, init);
    RngStream drop = init.derive("dropout");
    Var x = make_leaf(x0);
    Var h = dropout(gelu(linear(x, make_const(w), Var())), 0.2, drop, true);
    Var loss = sum_all(mul(h, h));
    backward(loss);
    return std::pair{loss.value()[0], x.grad().clone()};
  };
  auto [l1, g1] = run(42);
  auto [l2, g2] = run(42);
  CHECK(l1 == l2);
  for (std::int64_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}
