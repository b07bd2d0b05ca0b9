#include "knockoffs/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace knockoffs {

namespace {

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                   Eigen::Dynamic,
                                                   Eigen::RowMajor>>;

thread_local bool g_grad_enabled = true;

ConstMatMap mat(const Tensor& t, std::int64_t r, std::int64_t c) {
  return ConstMatMap(t.data().data(), r, c);
}
MatMap mat(Tensor& t, std::int64_t r, std::int64_t c) {
  return MatMap(t.mutable_data().data(), r, c);
}

void accumulate(Node& n, const Tensor& g) {
  ensure_grad(n);
  auto dst = n.grad.mutable_data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Builds the result node; drops the tape when grads are off or no input
// needs them.
Var make_op(Tensor value, std::vector<Var> inputs,
            std::function<void(Node&)> backprop) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool need = false;
  if (g_grad_enabled)
    for (const Var& v : inputs)
      if (v.requires_grad()) need = true;
  if (need) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const Var& v : inputs) node->parents.push_back(v.node());
    node->backprop = std::move(backprop);
  }
  return Var(std::move(node));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

void ensure_grad(Node& node) {
  if (!node.grad.defined()) node.grad = Tensor::zeros(node.value.shape());
}

Var custom_op(Tensor value, std::vector<Var> inputs,
              std::function<void(Node&)> backprop) {
  return make_op(std::move(value), std::move(inputs), std::move(backprop));
}

const Tensor& Var::grad() const {
  ensure_grad(*node_);
  return node_->grad;
}

void Var::set_value(Tensor v) {
  if (!node_->is_leaf) throw std::logic_error("set_value on non-leaf");
  check_same_shape(node_->value, v, "set_value");
  node_->value = std::move(v);
}

void Var::zero_grad() { node_->grad = Tensor(); }

Var make_leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->is_leaf = true;
  return Var(std::move(node));
}

Var make_const(Tensor value) { return make_leaf(std::move(value), false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& loss) {
  Node* root = loss.node().get();
  if (root == nullptr) throw std::logic_error("backward on empty var");
  if (root->value.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  if (root->backward_ran)
    throw std::logic_error("backward called twice without a new forward pass");
  root->backward_ran = true;
  if (!root->requires_grad) return;

  // Iterative post-order DFS; reverse of post-order is a valid topological
  // order for the backward sweep.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx].get();
      ++idx;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  ensure_grad(*root);
  root->grad.mutable_data()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise / broadcast
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "add");
  Tensor out = Tensor::zeros(a.value().shape());
  auto o = out.mutable_data();
  auto x = a.value().data(), y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    if (n.parents[0]->requires_grad) accumulate(*n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) accumulate(*n.parents[1], n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out = Tensor::zeros(a.value().shape());
  auto o = out.mutable_data();
  auto x = a.value().data(), y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    if (n.parents[0]->requires_grad) accumulate(*n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) {
      ensure_grad(*n.parents[1]);
      auto dst = n.parents[1]->grad.mutable_data();
      auto g = n.grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out = Tensor::zeros(a.value().shape());
  auto o = out.mutable_data();
  auto x = a.value().data(), y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return make_op(std::move(out), {a, b}, [](Node& n) {
    auto g = n.grad.data();
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      ensure_grad(*n.parents[0]);
      auto dst = n.parents[0]->grad.mutable_data();
      auto y = bv.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * y[i];
    }
    if (n.parents[1]->requires_grad) {
      ensure_grad(*n.parents[1]);
      auto dst = n.parents[1]->grad.mutable_data();
      auto x = av.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * x[i];
    }
  });
}

Var scale(const Var& a, double c) {
  Tensor out = Tensor::zeros(a.value().shape());
  auto o = out.mutable_data();
  auto x = a.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * c;
  return make_op(std::move(out), {a}, [c](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    auto g = n.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * c;
  });
}

Var add_rowvec(const Var& x, const Var& b) {
  const std::int64_t R = x.value().rows(), C = x.value().cols();
  if (b.value().size() != C)
    throw std::invalid_argument("add_rowvec: shape mismatch");
  Tensor out = Tensor::zeros(x.value().shape());
  auto o = out.mutable_data();
  auto xv = x.value().data();
  auto bv = b.value().data();
  for (std::int64_t r = 0; r < R; ++r)
    for (std::int64_t c = 0; c < C; ++c)
      o[static_cast<std::size_t>(r * C + c)] =
          xv[static_cast<std::size_t>(r * C + c)] + bv[static_cast<std::size_t>(c)];
  return make_op(std::move(out), {x, b}, [R, C](Node& n) {
    auto g = n.grad.data();
    if (n.parents[0]->requires_grad) accumulate(*n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) {
      ensure_grad(*n.parents[1]);
      auto db = n.parents[1]->grad.mutable_data();
      for (std::int64_t r = 0; r < R; ++r)
        for (std::int64_t c = 0; c < C; ++c)
          db[static_cast<std::size_t>(c)] += g[static_cast<std::size_t>(r * C + c)];
    }
  });
}

Var affine_rows(const Var& x, const Var& g, const Var& b) {
  const std::int64_t R = x.value().rows(), C = x.value().cols();
  if (g.value().size() != C || b.value().size() != C)
    throw std::invalid_argument("affine_rows: shape mismatch");
  Tensor out = Tensor::zeros(x.value().shape());
  auto o = out.mutable_data();
  auto xv = x.value().data();
  auto gv = g.value().data();
  auto bv = b.value().data();
  for (std::int64_t r = 0; r < R; ++r)
    for (std::int64_t c = 0; c < C; ++c) {
      const auto i = static_cast<std::size_t>(r * C + c);
      o[i] = xv[i] * gv[static_cast<std::size_t>(c)] + bv[static_cast<std::size_t>(c)];
    }
  return make_op(std::move(out), {x, g, b}, [R, C](Node& n) {
    auto go = n.grad.data();
    const Tensor& xv = n.parents[0]->value;
    const Tensor& gv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      ensure_grad(*n.parents[0]);
      auto dst = n.parents[0]->grad.mutable_data();
      auto gd = gv.data();
      for (std::int64_t r = 0; r < R; ++r)
        for (std::int64_t c = 0; c < C; ++c) {
          const auto i = static_cast<std::size_t>(r * C + c);
          dst[i] += go[i] * gd[static_cast<std::size_t>(c)];
        }
    }
    if (n.parents[1]->requires_grad) {
      ensure_grad(*n.parents[1]);
      auto dg = n.parents[1]->grad.mutable_data();
      auto xd = xv.data();
      for (std::int64_t r = 0; r < R; ++r)
        for (std::int64_t c = 0; c < C; ++c) {
          const auto i = static_cast<std::size_t>(r * C + c);
          dg[static_cast<std::size_t>(c)] += go[i] * xd[i];
        }
    }
    if (n.parents[2]->requires_grad) {
      ensure_grad(*n.parents[2]);
      auto db = n.parents[2]->grad.mutable_data();
      for (std::int64_t r = 0; r < R; ++r)
        for (std::int64_t c = 0; c < C; ++c)
          db[static_cast<std::size_t>(c)] += go[static_cast<std::size_t>(r * C + c)];
    }
  });
}

namespace {

// Shared shape logic for the grouped-row broadcast ops, where s has one row
// per group of `group` consecutive rows of x.
void check_grouped(const Tensor& x, const Tensor& s, std::int64_t group,
                   const char* op) {
  if (group <= 0 || x.rows() % group != 0 ||
      x.rows() / group != s.rows() || x.cols() != s.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var mul_grouped_rows(const Var& x, const Var& s, std::int64_t group) {
  check_grouped(x.value(), s.value(), group, "mul_grouped_rows");
  const std::int64_t R = x.value().rows(), C = x.value().cols();
  Tensor out = Tensor::zeros(x.value().shape());
  auto o = out.mutable_data();
  auto xv = x.value().data();
  auto sv = s.value().data();
  for (std::int64_t r = 0; r < R; ++r) {
    const std::int64_t q = r / group;
    for (std::int64_t c = 0; c < C; ++c)
      o[static_cast<std::size_t>(r * C + c)] =
          xv[static_cast<std::size_t>(r * C + c)] * sv[static_cast<std::size_t>(q * C + c)];
  }
  return make_op(std::move(out), {x, s}, [R, C, group](Node& n) {
    auto g = n.grad.data();
    const Tensor& xv = n.parents[0]->value;
    const Tensor& sv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      ensure_grad(*n.parents[0]);
      auto dst = n.parents[0]->grad.mutable_data();
      auto sd = sv.data();
      for (std::int64_t r = 0; r < R; ++r) {
        const std::int64_t q = r / group;
        for (std::int64_t c = 0; c < C; ++c)
          dst[static_cast<std::size_t>(r * C + c)] +=
              g[static_cast<std::size_t>(r * C + c)] * sd[static_cast<std::size_t>(q * C + c)];
      }
    }
    if (n.parents[1]->requires_grad) {
      ensure_grad(*n.parents[1]);
      auto ds = n.parents[1]->grad.mutable_data();
      auto xd = xv.data();
      for (std::int64_t r = 0; r < R; ++r) {
        const std::int64_t q = r / group;
        for (std::int64_t c = 0; c < C; ++c)
          ds[static_cast<std::size_t>(q * C + c)] +=
              g[static_cast<std::size_t>(r * C + c)] * xd[static_cast<std::size_t>(r * C + c)];
      }
    }
  });
}

Var add_grouped_rows(const Var& x, const Var& s, std::int64_t group) {
  check_grouped(x.value(), s.value(), group, "add_grouped_rows");
  const std::int64_t R = x.value().rows(), C = x.value().cols();
  Tensor out = Tensor::zeros(x.value().shape());
  auto o = out.mutable_data();
  auto xv = x.value().data();
  auto sv = s.value().data();
  for (std::int64_t r = 0; r < R; ++r) {
    const std::int64_t q = r / group;
    for (std::int64_t c = 0; c < C; ++c)
      o[static_cast<std::size_t>(r * C + c)] =
          xv[static_cast<std::size_t>(r * C + c)] + sv[static_cast<std::size_t>(q * C + c)];
  }
  return make_op(std::move(out), {x, s}, [R, C, group](Node& n) {
    auto g = n.grad.data();
    if (n.parents[0]->requires_grad) accumulate(*n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) {
      ensure_grad(*n.parents[1]);
      auto ds = n.parents[1]->grad.mutable_data();
      for (std::int64_t r = 0; r < R; ++r) {
        const std::int64_t q = r / group;
        for (std::int64_t c = 0; c < C; ++c)
          ds[static_cast<std::size_t>(q * C + c)] += g[static_cast<std::size_t>(r * C + c)];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.ndim() != 2 || bv.ndim() != 2 || av.cols() != bv.rows())
    throw std::invalid_argument("matmul: shape mismatch");
  const std::int64_t M = av.rows(), K = av.cols(), N = bv.cols();
  Tensor out = Tensor::zeros({M, N});
  mat(out, M, N).noalias() = mat(av, M, K) * mat(bv, K, N);
  return make_op(std::move(out), {a, b}, [M, K, N](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      ensure_grad(*n.parents[0]);
      mat(n.parents[0]->grad, M, K).noalias() +=
          mat(n.grad, M, N) * mat(bv, K, N).transpose();
    }
    if (n.parents[1]->requires_grad) {
      ensure_grad(*n.parents[1]);
      mat(n.parents[1]->grad, K, N).noalias() +=
          mat(av, M, K).transpose() * mat(n.grad, M, N);
    }
  });
}

Var bmm(const Var& a, const Var& b, bool transpose_b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.ndim() != 3 || bv.ndim() != 3 || av.dim(0) != bv.dim(0))
    throw std::invalid_argument("bmm: expects two 3-d tensors");
  const std::int64_t B = av.dim(0), M = av.dim(1), K = av.dim(2);
  const std::int64_t N = transpose_b ? bv.dim(1) : bv.dim(2);
  const std::int64_t bk = transpose_b ? bv.dim(2) : bv.dim(1);
  if (bk != K) throw std::invalid_argument("bmm: shape mismatch");
  Tensor out = Tensor::zeros({B, M, N});
  for (std::int64_t i = 0; i < B; ++i) {
    ConstMatMap A(av.data().data() + i * M * K, M, K);
    MatMap C(out.mutable_data().data() + i * M * N, M, N);
    if (transpose_b) {
      ConstMatMap Bm(bv.data().data() + i * N * K, N, K);
      C.noalias() = A * Bm.transpose();
    } else {
      ConstMatMap Bm(bv.data().data() + i * K * N, K, N);
      C.noalias() = A * Bm;
    }
  }
  return make_op(std::move(out), {a, b}, [B, M, K, N, transpose_b](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    if (n.parents[0]->requires_grad) {
      ensure_grad(*n.parents[0]);
      for (std::int64_t i = 0; i < B; ++i) {
        ConstMatMap G(n.grad.data().data() + i * M * N, M, N);
        MatMap dA(n.parents[0]->grad.mutable_data().data() + i * M * K, M, K);
        if (transpose_b) {
          ConstMatMap Bm(bv.data().data() + i * N * K, N, K);
          dA.noalias() += G * Bm;
        } else {
          ConstMatMap Bm(bv.data().data() + i * K * N, K, N);
          dA.noalias() += G * Bm.transpose();
        }
      }
    }
    if (n.parents[1]->requires_grad) {
      ensure_grad(*n.parents[1]);
      for (std::int64_t i = 0; i < B; ++i) {
        ConstMatMap G(n.grad.data().data() + i * M * N, M, N);
        ConstMatMap A(av.data().data() + i * M * K, M, K);
        if (transpose_b) {
          MatMap dB(n.parents[1]->grad.mutable_data().data() + i * N * K, N, K);
          dB.noalias() += G.transpose() * A;
        } else {
          MatMap dB(n.parents[1]->grad.mutable_data().data() + i * K * N, K, N);
          dB.noalias() += A.transpose() * G;
        }
      }
    }
  });
}

Var slice_cols(const Var& x, std::int64_t c0, std::int64_t c1) {
  const std::int64_t R = x.value().rows(), C = x.value().cols();
  if (c0 < 0 || c1 > C || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  const std::int64_t W = c1 - c0;
  Tensor out = Tensor::zeros({R, W});
  auto o = out.mutable_data();
  auto xv = x.value().data();
  for (std::int64_t r = 0; r < R; ++r)
    for (std::int64_t c = 0; c < W; ++c)
      o[static_cast<std::size_t>(r * W + c)] =
          xv[static_cast<std::size_t>(r * C + c0 + c)];
  return make_op(std::move(out), {x}, [R, C, c0, W](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    auto g = n.grad.data();
    for (std::int64_t r = 0; r < R; ++r)
      for (std::int64_t c = 0; c < W; ++c)
        dst[static_cast<std::size_t>(r * C + c0 + c)] +=
            g[static_cast<std::size_t>(r * W + c)];
  });
}

Var reshape(const Var& x, std::vector<std::int64_t> shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op(std::move(out), {x}, [](Node& n) {
    accumulate(*n.parents[0], n.grad.reshaped(n.parents[0]->value.shape()));
  });
}

namespace {

// (B*T, d) <-> (B*h, T, dh) index plumbing shared by split/merge.
void scatter_heads(std::span<const double> src, std::span<double> dst,
                   std::int64_t B, std::int64_t T, std::int64_t h,
                   std::int64_t dh, bool splitting) {
  const std::int64_t d = h * dh;
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t k = 0; k < dh; ++k) {
          const auto flat = static_cast<std::size_t>((b * T + t) * d + i * dh + k);
          const auto headed =
              static_cast<std::size_t>(((b * h + i) * T + t) * dh + k);
          if (splitting)
            dst[headed] = src[flat];
          else
            dst[flat] = src[headed];
        }
}

void scatter_heads_acc(std::span<const double> src, std::span<double> dst,
                       std::int64_t B, std::int64_t T, std::int64_t h,
                       std::int64_t dh, bool splitting) {
  const std::int64_t d = h * dh;
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t k = 0; k < dh; ++k) {
          const auto flat = static_cast<std::size_t>((b * T + t) * d + i * dh + k);
          const auto headed =
              static_cast<std::size_t>(((b * h + i) * T + t) * dh + k);
          if (splitting)
            dst[flat] += src[headed];
          else
            dst[headed] += src[flat];
        }
}

}  // namespace

Var split_heads(const Var& x, std::int64_t batch, std::int64_t tokens,
                std::int64_t heads) {
  const Tensor& xv = x.value();
  if (xv.rows() != batch * tokens || xv.cols() % heads != 0)
    throw std::invalid_argument("split_heads: shape mismatch");
  const std::int64_t dh = xv.cols() / heads;
  Tensor out = Tensor::zeros({batch * heads, tokens, dh});
  scatter_heads(xv.data(), out.mutable_data(), batch, tokens, heads, dh, true);
  return make_op(std::move(out), {x}, [batch, tokens, heads, dh](Node& n) {
    ensure_grad(*n.parents[0]);
    scatter_heads_acc(n.grad.data(), n.parents[0]->grad.mutable_data(), batch,
                      tokens, heads, dh, true);
  });
}

Var merge_heads(const Var& x, std::int64_t batch, std::int64_t tokens,
                std::int64_t heads) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 3 || xv.dim(0) != batch * heads || xv.dim(1) != tokens)
    throw std::invalid_argument("merge_heads: shape mismatch");
  const std::int64_t dh = xv.dim(2);
  Tensor out = Tensor::zeros({batch * tokens, heads * dh});
  scatter_heads(xv.data(), out.mutable_data(), batch, tokens, heads, dh, false);
  return make_op(std::move(out), {x}, [batch, tokens, heads, dh](Node& n) {
    ensure_grad(*n.parents[0]);
    scatter_heads_acc(n.grad.data(), n.parents[0]->grad.mutable_data(), batch,
                      tokens, heads, dh, false);
  });
}

// ---------------------------------------------------------------------------
// nonlinearities / normalization
// ---------------------------------------------------------------------------

namespace {

template <class Fwd, class Bwd>
Var unary_op(const Var& x, Fwd fwd, Bwd bwd_from_xy) {
  Tensor out = Tensor::zeros(x.value().shape());
  auto o = out.mutable_data();
  auto xv = x.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(xv[i]);
  return make_op(std::move(out), {x}, [bwd_from_xy](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    auto g = n.grad.data();
    auto xv = n.parents[0]->value.data();
    auto yv = n.value.data();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] += g[i] * bwd_from_xy(xv[i], yv[i]);
  });
}

}  // namespace

Var relu(const Var& x) {
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(const Var& x) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  return unary_op(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
}

Var elu(const Var& x, double alpha) {
  return unary_op(
      x,
      [alpha](double v) { return v > 0.0 ? v : alpha * std::expm1(v); },
      [alpha](double v, double y) { return v > 0.0 ? 1.0 : y + alpha; });
}

Var tanh_act(const Var& x) {
  return unary_op(x, [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& x) {
  return unary_op(
      x,
      [](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                        : std::exp(v) / (1.0 + std::exp(v));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var softmax_rows(const Var& x) {
  const Tensor& xv = x.value();
  std::int64_t C = xv.ndim() == 3 ? xv.dim(2) : xv.cols();
  const std::int64_t R = xv.size() / C;
  Tensor out = Tensor::zeros(xv.shape());
  auto o = out.mutable_data();
  auto in = xv.data();
  for (std::int64_t r = 0; r < R; ++r) {
    const auto base = static_cast<std::size_t>(r * C);
    double mx = in[base];
    for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, in[base + c]);
    double denom = 0.0;
    for (std::int64_t c = 0; c < C; ++c) {
      const double e = std::exp(in[base + c] - mx);
      o[base + c] = e;
      denom += e;
    }
    for (std::int64_t c = 0; c < C; ++c) o[base + c] /= denom;
  }
  return make_op(std::move(out), {x}, [R, C](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    auto g = n.grad.data();
    auto y = n.value.data();
    for (std::int64_t r = 0; r < R; ++r) {
      const auto base = static_cast<std::size_t>(r * C);
      double dot = 0.0;
      for (std::int64_t c = 0; c < C; ++c) dot += g[base + c] * y[base + c];
      for (std::int64_t c = 0; c < C; ++c)
        dst[base + c] += y[base + c] * (g[base + c] - dot);
    }
  });
}

Var layer_norm_rows(const Var& x, double eps) {
  const Tensor& xv = x.value();
  std::int64_t C = xv.ndim() == 3 ? xv.dim(2) : xv.cols();
  const std::int64_t R = xv.size() / C;
  Tensor out = Tensor::zeros(xv.shape());
  Tensor inv_std = Tensor::zeros({R});
  auto o = out.mutable_data();
  auto is = inv_std.mutable_data();
  auto in = xv.data();
  for (std::int64_t r = 0; r < R; ++r) {
    const auto base = static_cast<std::size_t>(r * C);
    double mean = 0.0;
    for (std::int64_t c = 0; c < C; ++c) mean += in[base + c];
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (std::int64_t c = 0; c < C; ++c) {
      const double d = in[base + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(C);
    const double istd = 1.0 / std::sqrt(var + eps);
    is[static_cast<std::size_t>(r)] = istd;
    for (std::int64_t c = 0; c < C; ++c)
      o[base + c] = (in[base + c] - mean) * istd;
  }
  return make_op(std::move(out), {x}, [R, C, inv_std](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    auto g = n.grad.data();
    auto y = n.value.data();
    auto is = inv_std.data();
    for (std::int64_t r = 0; r < R; ++r) {
      const auto base = static_cast<std::size_t>(r * C);
      double gmean = 0.0, gymean = 0.0;
      for (std::int64_t c = 0; c < C; ++c) {
        gmean += g[base + c];
        gymean += g[base + c] * y[base + c];
      }
      gmean /= static_cast<double>(C);
      gymean /= static_cast<double>(C);
      const double istd = is[static_cast<std::size_t>(r)];
      for (std::int64_t c = 0; c < C; ++c)
        dst[base + c] += istd * (g[base + c] - gmean - y[base + c] * gymean);
    }
  });
}

Var dropout(const Var& x, double rate, RngStream& rng, bool train) {
  if (!train || rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  // Inverted scaling at train time, so eval is the identity.
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask = Tensor::zeros(x.value().shape());
  auto m = mask.mutable_data();
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = rng.uniform() >= rate ? keep_scale : 0.0;
  Tensor out = Tensor::zeros(x.value().shape());
  auto o = out.mutable_data();
  auto xv = x.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * m[i];
  return make_op(std::move(out), {x}, [mask](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    auto g = n.grad.data();
    auto m = mask.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * m[i];
  });
}

// ---------------------------------------------------------------------------
// reductions / losses
// ---------------------------------------------------------------------------

Var sum_all(const Var& x) {
  Tensor out = Tensor::scalar(x.value().sum());
  return make_op(std::move(out), {x}, [](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    const double g = n.grad.data()[0];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g;
  });
}

Var mean_all(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x.value().size());
  Tensor out = Tensor::scalar(x.value().sum() * inv);
  return make_op(std::move(out), {x}, [inv](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    const double g = n.grad.data()[0] * inv;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g;
  });
}

namespace {

Var squared_error(const Var& pred, const Tensor& target, bool mean) {
  check_same_shape(pred.value(), target, "squared_error");
  const double inv =
      mean ? 1.0 / static_cast<double>(target.size()) : 1.0;
  auto p = pred.value().data();
  auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    acc += d * d;
  }
  Tensor out = Tensor::scalar(acc * inv);
  return make_op(std::move(out), {pred}, [target, inv](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    auto p = n.parents[0]->value.data();
    auto t = target.data();
    const double g = n.grad.data()[0];
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] += g * 2.0 * (p[i] - t[i]) * inv;
  });
}

inline double softplus(double v) {
  if (v > 30.0) return v;
  if (v < -30.0) return std::exp(v);
  return std::log1p(std::exp(v));
}

}  // namespace

Var mse_loss(const Var& pred, const Tensor& target) {
  return squared_error(pred, target, true);
}

Var sse_loss(const Var& pred, const Tensor& target) {
  return squared_error(pred, target, false);
}

Var bce_logits_loss(const Var& logits, const Tensor& target, bool mean) {
  check_same_shape(logits.value(), target, "bce_logits_loss");
  const double inv =
      mean ? 1.0 / static_cast<double>(target.size()) : 1.0;
  auto x = logits.value().data();
  auto y = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    acc += softplus(x[i]) - x[i] * y[i];
  Tensor out = Tensor::scalar(acc * inv);
  return make_op(std::move(out), {logits}, [target, inv](Node& n) {
    ensure_grad(*n.parents[0]);
    auto dst = n.parents[0]->grad.mutable_data();
    auto x = n.parents[0]->value.data();
    auto y = target.data();
    const double g = n.grad.data()[0];
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const double sig = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i]))
                                     : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      dst[i] += g * (sig - y[i]) * inv;
    }
  });
}

// ---------------------------------------------------------------------------
// pairwise filter layer
// ---------------------------------------------------------------------------

namespace {
inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}  // namespace

Var pairwise_filter(const Var& x, const Var& xk, const Var& z,
                    const Var& zk) {
  const Tensor& xv = x.value();
  const Tensor& kv = xk.value();
  const Tensor& zv = z.value();
  const Tensor& zkv = zk.value();
  check_same_shape(xv, kv, "pairwise_filter");
  const std::int64_t n = xv.rows(), p = xv.cols();
  if (zv.size() != p || zkv.size() != p)
    throw std::invalid_argument("pairwise_filter: weight length mismatch");

  std::vector<double> a(static_cast<std::size_t>(p)),
      b(static_cast<std::size_t>(p));
  for (std::int64_t j = 0; j < p; ++j) {
    const double s = std::abs(zv[j]) + std::abs(zkv[j]);
    a[static_cast<std::size_t>(j)] = s > 0.0 ? zv[j] / s : 0.0;
    b[static_cast<std::size_t>(j)] = s > 0.0 ? zkv[j] / s : 0.0;
  }
  Tensor out = Tensor::zeros({n, p});
  auto o = out.mutable_data();
  auto xd = xv.data();
  auto kd = kv.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < p; ++j) {
      const auto idx = static_cast<std::size_t>(i * p + j);
      o[idx] = a[static_cast<std::size_t>(j)] * xd[idx] +
               b[static_cast<std::size_t>(j)] * kd[idx];
    }

  return make_op(std::move(out), {x, xk, z, zk}, [n, p](Node& nd) {
    auto g = nd.grad.data();
    auto f = nd.value.data();
    const Tensor& xv = nd.parents[0]->value;
    const Tensor& kv = nd.parents[1]->value;
    const Tensor& zv = nd.parents[2]->value;
    const Tensor& zkv = nd.parents[3]->value;
    for (std::int64_t j = 0; j < p; ++j) {
      const double s = std::abs(zv[j]) + std::abs(zkv[j]);
      const double aj = s > 0.0 ? zv[j] / s : 0.0;
      const double bj = s > 0.0 ? zkv[j] / s : 0.0;
      double dz = 0.0, dzk = 0.0;
      const bool need_x = nd.parents[0]->requires_grad;
      const bool need_k = nd.parents[1]->requires_grad;
      if (need_x) ensure_grad(*nd.parents[0]);
      if (need_k) ensure_grad(*nd.parents[1]);
      for (std::int64_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i * p + j);
        const double gi = g[idx];
        if (need_x) nd.parents[0]->grad.mutable_data()[idx] += gi * aj;
        if (need_k) nd.parents[1]->grad.mutable_data()[idx] += gi * bj;
        if (s > 0.0) {
          dz += gi * (xv.data()[idx] - f[idx] * sgn(zv[j])) / s;
          dzk += gi * (kv.data()[idx] - f[idx] * sgn(zkv[j])) / s;
        }
      }
      if (nd.parents[2]->requires_grad) {
        ensure_grad(*nd.parents[2]);
        nd.parents[2]->grad.mutable_data()[static_cast<std::size_t>(j)] += dz;
      }
      if (nd.parents[3]->requires_grad) {
        ensure_grad(*nd.parents[3]);
        nd.parents[3]->grad.mutable_data()[static_cast<std::size_t>(j)] += dzk;
      }
    }
  });
}

}  // namespace knockoffs
