#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "knockoffs/rng.hpp"
#include "knockoffs/tensor.hpp"

namespace knockoffs {

// Reverse-mode tape. Graphs are built by the op functions below, confined
// to one thread, and torn down when the root Var goes out of scope.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool is_leaf = false;
  bool backward_ran = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // reads grad, accumulates into parents
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const;  // zeros-shaped if never touched
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // Leaf-only mutations used by optimizers.
  void set_value(Tensor v);
  void zero_grad();

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var make_leaf(Tensor value, bool requires_grad = true);
Var make_const(Tensor value);

// Allocates the gradient buffer (zeros) if the node does not have one yet.
void ensure_grad(Node& node);

// Escape hatch for ops with hand-written backward passes. The closure reads
// node.grad and accumulates into node.parents[i]->grad (ensure_grad first).
// The tape edge is dropped automatically under NoGradGuard or when no input
// requires gradients.
Var custom_op(Tensor value, std::vector<Var> inputs,
              std::function<void(Node&)> backprop);

// While one of these is alive (per thread) ops do not record the tape.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Runs reverse-mode accumulation from a scalar loss. Each reachable node is
// visited exactly once in reverse topological order; leaves end up holding
// dL/dleaf (zero where unreached). Throws if the loss is not scalar or if
// the same graph is swept twice.
void backward(const Var& loss);

// ---- elementwise / broadcast ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_rowvec(const Var& x, const Var& b);            // (R,C) + (C)
Var affine_rows(const Var& x, const Var& g, const Var& b);  // x*g + b, row-bcast
Var mul_grouped_rows(const Var& x, const Var& s, std::int64_t group);
Var add_grouped_rows(const Var& x, const Var& s, std::int64_t group);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);                // (M,K)x(K,N)
Var bmm(const Var& a, const Var& b, bool transpose_b); // (B,M,K)x(B,K,N | B,N,K)
Var slice_cols(const Var& x, std::int64_t c0, std::int64_t c1);
Var reshape(const Var& x, std::vector<std::int64_t> shape);
Var split_heads(const Var& x, std::int64_t batch, std::int64_t tokens,
                std::int64_t heads);  // (B*T, d) -> (B*h, T, d/h)
Var merge_heads(const Var& x, std::int64_t batch, std::int64_t tokens,
                std::int64_t heads);  // inverse of split_heads

// ---- nonlinearities / normalization ----
Var relu(const Var& x);
Var gelu(const Var& x);
Var elu(const Var& x, double alpha = 1.0);
Var tanh_act(const Var& x);
Var sigmoid(const Var& x);
Var softmax_rows(const Var& x);
Var layer_norm_rows(const Var& x, double eps);
Var dropout(const Var& x, double rate, RngStream& rng, bool train);

// ---- reductions / losses ----
Var sum_all(const Var& x);
Var mean_all(const Var& x);
// Mean over elements of (pred - target)^2.
Var mse_loss(const Var& pred, const Tensor& target);
// Sum over elements of (pred - target)^2 (per-sample losses left unscaled).
Var sse_loss(const Var& pred, const Tensor& target);
// Binary cross entropy on logits; `mean` picks the reduction.
Var bce_logits_loss(const Var& logits, const Tensor& target, bool mean);

// Pairwise feature/knockoff filter: column j of the output is
//   f_j = z_j/(|z_j|+|zk_j|) * x_j + zk_j/(|z_j|+|zk_j|) * xk_j,
// with f_j = 0 and zero gradients when (z_j, zk_j) = (0, 0).
Var pairwise_filter(const Var& x, const Var& xk, const Var& z, const Var& zk);

}  // namespace knockoffs
