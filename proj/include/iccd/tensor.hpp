#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace iccd {

// Reverse-mode automatic differentiation over dense 64-bit tensors.
//
// Each op allocates a node holding its output; nodes keep shared ownership of
// their inputs, so a Tensor handle to the root keeps the whole graph alive.
// Nodes carry a monotonically increasing creation id, which is a topological
// order of the DAG; backward() walks reachable nodes by descending id.

enum class OpKind {
  leaf,
  matmul,
  add,
  add_bias,
  relu,
  exp,
  log,
  softmax_rows,
  dot,
  l2_normalize_rows,
  sum,
  mean,
  scale,
  row,
};

namespace detail {

struct Node {
  std::vector<int> shape;
  std::vector<double> data;   // row-major
  std::vector<double> grad;   // empty until backward reaches the node
  bool requires_grad = false;
  OpKind op = OpKind::leaf;
  std::vector<std::shared_ptr<Node>> inputs;
  double scalar_arg = 0.0;     // scale factor / row index
  std::vector<double> saved;   // op cache (softmax output shares data; norms here)
  std::uint64_t id = 0;

  std::int64_t size() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
};

}  // namespace detail

class Tensor {
public:
  Tensor() = default;

  // Leaf constructors.
  static Tensor from(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  std::int64_t size() const;
  bool requires_grad() const;

  // Scalar value; throws ContractError when the tensor is not scalar.
  double value() const;

  std::span<const double> data() const;
  // Leaf-only mutable access (optimizer updates). Throws on non-leaf nodes.
  std::span<double> mutable_data();

  // Gradient buffer; empty span when backward has not touched this node.
  std::span<const double> grad() const;
  void zero_grad();

  // Value copy detached from the graph (no grad, no inputs).
  Tensor detached() const;

  std::uint64_t id() const;

private:
  friend Tensor make_op(OpKind, std::vector<int>, std::vector<double>,
                        std::vector<std::shared_ptr<detail::Node>>, double, std::vector<double>);
  friend void backward(const Tensor&);
  friend class GradAccess;

  std::shared_ptr<detail::Node> node_;
};

// Forward ops. Shape contracts throw DimensionError; matmul is [M,K]x[K,N],
// add accepts equal shapes or matrix + row-bias [N,D]+[D], dot folds two
// equal-shape tensors to a scalar, row slices one row of a matrix.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // clamped at kLogFloor below the floor
Tensor softmax_rows(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor l2_normalize_rows(const Tensor& x);  // throws NumericError on ~zero rows
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor row(const Tensor& x, int index);  // [N,D] -> [D]

inline constexpr double kLogFloor = 1e-12;

// Accumulates d(root)/d(leaf) into every requires_grad node reachable from
// root. Root must be scalar (ContractError otherwise).
void backward(const Tensor& root);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|),
// with the central difference taken at the given step. f must build a fresh
// graph per call and return a scalar. Throws NumericError on non-finite values.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step);

}  // namespace iccd
