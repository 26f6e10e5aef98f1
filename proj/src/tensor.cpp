#include "iccd/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "iccd/errors.hpp"
#include "iccd/kernels.hpp"

namespace iccd {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::atomic<std::uint64_t> g_next_id{1};

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

NodePtr make_node(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  n->id = g_next_id.fetch_add(1);
  if (n->size() != static_cast<std::int64_t>(n->data.size()))
    throw DimensionError("tensor data length " + std::to_string(n->data.size()) +
                         " does not match shape " + shape_str(n->shape));
  return n;
}

void ensure_grad(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
}

bool is_matrix(const Node& n) { return n.shape.size() == 2; }

}  // namespace

Tensor make_op(OpKind op, std::vector<int> shape, std::vector<double> data,
               std::vector<NodePtr> inputs, double scalar_arg, std::vector<double> saved) {
  bool rg = false;
  for (const auto& in : inputs) rg = rg || in->requires_grad;
  auto n = make_node(std::move(shape), std::move(data), rg);
  n->op = op;
  n->inputs = std::move(inputs);
  n->scalar_arg = scalar_arg;
  n->saved = std::move(saved);
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

class GradAccess {
public:
  static NodePtr node(const Tensor& t) { return t.node_; }
  static Tensor wrap(NodePtr n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }
};

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  Tensor t;
  t.node_ = make_node(std::move(shape), std::move(data), requires_grad);
  return t;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return from(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0),
              requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

const std::vector<int>& Tensor::shape() const { return node_->shape; }

std::int64_t Tensor::size() const { return node_->size(); }

bool Tensor::requires_grad() const { return node_->requires_grad; }

double Tensor::value() const {
  if (node_->size() != 1)
    throw ContractError("value() requires a scalar tensor, got shape " + shape_str(node_->shape));
  return node_->data[0];
}

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() {
  if (node_->op != OpKind::leaf)
    throw ContractError("mutable_data() is restricted to leaf tensors");
  return node_->data;
}

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::detached() const {
  return Tensor::from(node_->shape, node_->data, false);
}

std::uint64_t Tensor::id() const { return node_->id; }

// ---------------------------------------------------------------------------
// ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto an = GradAccess::node(a);
  const auto bn = GradAccess::node(b);
  if (!is_matrix(*an) || !is_matrix(*bn) || an->shape[1] != bn->shape[0])
    throw DimensionError("matmul shapes incompatible: " + shape_str(an->shape) + " x " +
                         shape_str(bn->shape));
  const int m = an->shape[0], k = an->shape[1], n = bn->shape[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  kernels::matmul(an->data.data(), bn->data.data(), out.data(), m, k, n);
  return make_op(OpKind::matmul, {m, n}, std::move(out), {an, bn}, 0.0, {});
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto an = GradAccess::node(a);
  const auto bn = GradAccess::node(b);
  if (an->shape == bn->shape) {
    std::vector<double> out(an->data.size());
    kernels::add(an->data.data(), bn->data.data(), out.data(), an->size());
    return make_op(OpKind::add, an->shape, std::move(out), {an, bn}, 0.0, {});
  }
  // Row-wise bias: [N,D] + [D].
  if (is_matrix(*an) && bn->shape.size() == 1 && an->shape[1] == bn->shape[0]) {
    const int rows = an->shape[0], cols = an->shape[1];
    std::vector<double> out(an->data.size());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        out[static_cast<std::size_t>(i) * cols + j] =
            an->data[static_cast<std::size_t>(i) * cols + j] + bn->data[j];
    return make_op(OpKind::add_bias, an->shape, std::move(out), {an, bn}, 0.0, {});
  }
  throw DimensionError("add shapes incompatible: " + shape_str(an->shape) + " + " +
                       shape_str(bn->shape));
}

Tensor relu(const Tensor& x) {
  const auto xn = GradAccess::node(x);
  std::vector<double> out(xn->data.size());
  kernels::relu(xn->data.data(), out.data(), xn->size());
  return make_op(OpKind::relu, xn->shape, std::move(out), {xn}, 0.0, {});
}

Tensor exp(const Tensor& x) {
  const auto xn = GradAccess::node(x);
  std::vector<double> out(xn->data.size());
  kernels::exp(xn->data.data(), out.data(), xn->size());
  return make_op(OpKind::exp, xn->shape, std::move(out), {xn}, 0.0, {});
}

Tensor log(const Tensor& x) {
  const auto xn = GradAccess::node(x);
  std::vector<double> out(xn->data.size());
  kernels::log_clamped(xn->data.data(), out.data(), kLogFloor, xn->size());
  return make_op(OpKind::log, xn->shape, std::move(out), {xn}, 0.0, {});
}

Tensor softmax_rows(const Tensor& x) {
  const auto xn = GradAccess::node(x);
  if (!is_matrix(*xn) && xn->shape.size() != 1)
    throw DimensionError("softmax_rows expects a vector or matrix, got " + shape_str(xn->shape));
  const int rows = is_matrix(*xn) ? xn->shape[0] : 1;
  const int cols = is_matrix(*xn) ? xn->shape[1] : xn->shape[0];
  std::vector<double> out(xn->data.size());
  kernels::softmax_rows(xn->data.data(), out.data(), rows, cols);
  return make_op(OpKind::softmax_rows, xn->shape, std::move(out), {xn}, 0.0, {});
}

Tensor dot(const Tensor& a, const Tensor& b) {
  const auto an = GradAccess::node(a);
  const auto bn = GradAccess::node(b);
  if (an->shape != bn->shape)
    throw DimensionError("dot shapes differ: " + shape_str(an->shape) + " vs " +
                         shape_str(bn->shape));
  const double v = kernels::dot(an->data.data(), bn->data.data(), an->size());
  return make_op(OpKind::dot, {}, {v}, {an, bn}, 0.0, {});
}

Tensor l2_normalize_rows(const Tensor& x) {
  const auto xn = GradAccess::node(x);
  if (!is_matrix(*xn) && xn->shape.size() != 1)
    throw DimensionError("l2_normalize_rows expects a vector or matrix, got " +
                         shape_str(xn->shape));
  const int rows = is_matrix(*xn) ? xn->shape[0] : 1;
  const int cols = is_matrix(*xn) ? xn->shape[1] : xn->shape[0];
  std::vector<double> norms(static_cast<std::size_t>(rows));
  kernels::row_norms(xn->data.data(), norms.data(), rows, cols);
  for (int i = 0; i < rows; ++i)
    if (norms[i] < 1e-12)
      throw NumericError("l2_normalize_rows: row " + std::to_string(i) +
                         " has near-zero norm " + std::to_string(norms[i]));
  std::vector<double> out(xn->data.size());
  kernels::divide_rows(xn->data.data(), norms.data(), out.data(), rows, cols);
  return make_op(OpKind::l2_normalize_rows, xn->shape, std::move(out), {xn}, 0.0,
                 std::move(norms));
}

Tensor sum(const Tensor& x) {
  const auto xn = GradAccess::node(x);
  return make_op(OpKind::sum, {}, {kernels::sum(xn->data.data(), xn->size())}, {xn}, 0.0, {});
}

Tensor mean(const Tensor& x) {
  const auto xn = GradAccess::node(x);
  if (xn->size() == 0) throw ContractError("mean of an empty tensor");
  const double v = kernels::sum(xn->data.data(), xn->size()) / static_cast<double>(xn->size());
  return make_op(OpKind::mean, {}, {v}, {xn}, 0.0, {});
}

Tensor scale(const Tensor& x, double factor) {
  const auto xn = GradAccess::node(x);
  std::vector<double> out(xn->data.size());
  kernels::scale(xn->data.data(), out.data(), factor, xn->size());
  return make_op(OpKind::scale, xn->shape, std::move(out), {xn}, factor, {});
}

Tensor row(const Tensor& x, int index) {
  const auto xn = GradAccess::node(x);
  if (!is_matrix(*xn))
    throw DimensionError("row expects a matrix, got " + shape_str(xn->shape));
  if (index < 0 || index >= xn->shape[0])
    throw ContractError("row index " + std::to_string(index) + " out of range [0," +
                        std::to_string(xn->shape[0]) + ")");
  const int cols = xn->shape[1];
  const auto* src = xn->data.data() + static_cast<std::size_t>(index) * cols;
  return make_op(OpKind::row, {cols}, std::vector<double>(src, src + cols), {xn},
                 static_cast<double>(index), {});
}

// ---------------------------------------------------------------------------
// backward

namespace {

void backward_into(Node& n) {
  const auto& dy = n.grad;
  switch (n.op) {
    case OpKind::leaf:
      return;
    case OpKind::matmul: {
      Node& a = *n.inputs[0];
      Node& b = *n.inputs[1];
      const int m = a.shape[0], k = a.shape[1], cols = b.shape[1];
      if (a.requires_grad) {
        ensure_grad(a);
        // dA += dC * B^T, computed into a scratch then accumulated so the
        // kernel stays a pure product.
        std::vector<double> scratch(a.data.size());
        kernels::matmul_nt(dy.data(), b.data.data(), scratch.data(), m, cols, k);
        kernels::axpy(1.0, scratch.data(), a.grad.data(), a.size());
      }
      if (b.requires_grad) {
        ensure_grad(b);
        kernels::matmul_tn_acc(a.data.data(), dy.data(), b.grad.data(), m, k, cols);
      }
      return;
    }
    case OpKind::add: {
      for (int which = 0; which < 2; ++which) {
        Node& in = *n.inputs[which];
        if (!in.requires_grad) continue;
        ensure_grad(in);
        kernels::axpy(1.0, dy.data(), in.grad.data(), in.size());
      }
      return;
    }
    case OpKind::add_bias: {
      Node& a = *n.inputs[0];
      Node& b = *n.inputs[1];
      const int rows = a.shape[0], cols = a.shape[1];
      if (a.requires_grad) {
        ensure_grad(a);
        kernels::axpy(1.0, dy.data(), a.grad.data(), a.size());
      }
      if (b.requires_grad) {
        ensure_grad(b);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j)
            b.grad[j] += dy[static_cast<std::size_t>(i) * cols + j];
      }
      return;
    }
    case OpKind::relu: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      kernels::relu_backward(a.data.data(), dy.data(), a.grad.data(), a.size());
      return;
    }
    case OpKind::exp: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i) a.grad[i] += dy[i] * n.data[i];
      return;
    }
    case OpKind::log: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      kernels::log_clamped_backward(a.data.data(), dy.data(), a.grad.data(), kLogFloor, a.size());
      return;
    }
    case OpKind::softmax_rows: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      const int rows = a.shape.size() == 2 ? a.shape[0] : 1;
      const int cols = a.shape.size() == 2 ? a.shape[1] : a.shape[0];
      kernels::softmax_rows_backward(n.data.data(), dy.data(), a.grad.data(), rows, cols);
      return;
    }
    case OpKind::dot: {
      Node& a = *n.inputs[0];
      Node& b = *n.inputs[1];
      const double d = dy[0];
      if (a.requires_grad) {
        ensure_grad(a);
        kernels::axpy(d, b.data.data(), a.grad.data(), a.size());
      }
      if (b.requires_grad) {
        ensure_grad(b);
        kernels::axpy(d, a.data.data(), b.grad.data(), b.size());
      }
      return;
    }
    case OpKind::l2_normalize_rows: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      const int rows = a.shape.size() == 2 ? a.shape[0] : 1;
      const int cols = a.shape.size() == 2 ? a.shape[1] : a.shape[0];
      kernels::l2_normalize_rows_backward(n.data.data(), dy.data(), n.saved.data(), a.grad.data(),
                                          rows, cols);
      return;
    }
    case OpKind::sum: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      const double d = dy[0];
      for (auto& g : a.grad) g += d;
      return;
    }
    case OpKind::mean: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      const double d = dy[0] / static_cast<double>(a.size());
      for (auto& g : a.grad) g += d;
      return;
    }
    case OpKind::scale: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      kernels::axpy(n.scalar_arg, dy.data(), a.grad.data(), a.size());
      return;
    }
    case OpKind::row: {
      Node& a = *n.inputs[0];
      if (!a.requires_grad) return;
      ensure_grad(a);
      const int cols = a.shape[1];
      const auto index = static_cast<std::size_t>(n.scalar_arg);
      for (int j = 0; j < cols; ++j) a.grad[index * cols + j] += dy[j];
      return;
    }
  }
}

void collect_reachable(const NodePtr& root, std::vector<Node*>& out) {
  std::vector<Node*> stack{root.get()};
  std::unordered_set<Node*> seen;
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    out.push_back(n);
    for (const auto& in : n->inputs) stack.push_back(in.get());
  }
}

}  // namespace

void backward(const Tensor& root) {
  const auto rn = GradAccess::node(root);
  if (!rn) throw ContractError("backward on an undefined tensor");
  if (rn->size() != 1)
    throw ContractError("backward requires a scalar root, got shape " + shape_str(rn->shape));

  std::vector<Node*> nodes;
  nodes.reserve(256);
  collect_reachable(rn, nodes);
  // Creation ids give a topological order; children always have larger ids
  // than their inputs.
  std::sort(nodes.begin(), nodes.end(), [](Node* a, Node* b) { return a->id > b->id; });

  for (Node* n : nodes)
    if (n->requires_grad) ensure_grad(*n);

  ensure_grad(*rn);
  rn->grad[0] += 1.0;

  for (Node* n : nodes) {
    if (!n->requires_grad || n->op == OpKind::leaf) continue;
    backward_into(*n);
  }
}

// ---------------------------------------------------------------------------
// grad_check

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step) {
  if (step <= 0.0) throw ContractError("grad_check step must be positive");

  Tensor probe = Tensor::from(x.shape(), {x.data().begin(), x.data().end()}, true);
  Tensor out = f(probe);
  if (out.size() != 1) throw ContractError("grad_check target must return a scalar");
  if (!std::isfinite(out.value())) throw NumericError("grad_check: non-finite function value");
  backward(out);

  std::vector<double> analytic(probe.size(), 0.0);
  if (!probe.grad().empty())
    std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());

  std::vector<double> base{x.data().begin(), x.data().end()};
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto eval_at = [&](double v) {
      std::vector<double> perturbed = base;
      perturbed[i] = v;
      const double y = f(Tensor::from(x.shape(), std::move(perturbed), false)).value();
      if (!std::isfinite(y)) throw NumericError("grad_check: non-finite value at probe point");
      return y;
    };
    const double numeric = (eval_at(base[i] + step) - eval_at(base[i] - step)) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace iccd
