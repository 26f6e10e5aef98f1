#include "iccd/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "iccd/errors.hpp"

namespace iccd {

namespace {

void require_vector_pair(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(what) + ": operand shapes differ (" +
                         std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                         " elements)");
}

}  // namespace

void require_simplex(std::span<const double> p, const char* what) {
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0)
      throw ContractError(std::string(what) + ": negative probability entry " + std::to_string(v));
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ContractError(std::string(what) + ": probabilities sum to " + std::to_string(total));
}

Tensor cross_entropy(const Tensor& target, const Tensor& pred) {
  require_vector_pair(target, pred, "cross_entropy");
  return scale(dot(target, log(pred)), -1.0);
}

Tensor cross_entropy_rows_mean(const Tensor& target, const Tensor& pred) {
  require_vector_pair(target, pred, "cross_entropy_rows_mean");
  if (target.shape().size() != 2)
    throw DimensionError("cross_entropy_rows_mean expects [N,C] matrices");
  const double rows = static_cast<double>(target.shape()[0]);
  return scale(dot(target, log(pred)), -1.0 / rows);
}

Tensor kd_student_loss(const Tensor& y, const Tensor& p_t, const Tensor& p_s, double alpha) {
  if (alpha < 0.0 || alpha > 1.0)
    throw ContractError("kd_student_loss: alpha must lie in [0,1], got " + std::to_string(alpha));
  require_simplex(y.data(), "kd_student_loss y");
  require_simplex(p_t.data(), "kd_student_loss p_t");
  require_simplex(p_s.data(), "kd_student_loss p_s");
  return add(scale(cross_entropy(y, p_s), alpha), scale(cross_entropy(p_t, p_s), 1.0 - alpha));
}

Tensor tuplet_loss(const Tensor& anchor, const Tensor& positive,
                   const std::vector<Tensor>& negatives) {
  if (negatives.empty()) throw ContractError("tuplet_loss: negatives must be non-empty");
  require_vector_pair(anchor, positive, "tuplet_loss");
  for (const auto& n : negatives) require_vector_pair(anchor, n, "tuplet_loss");

  Tensor sum_exp;
  for (const auto& n : negatives) {
    Tensor e = exp(dot(anchor, n));
    sum_exp = sum_exp.defined() ? add(sum_exp, e) : e;
  }
  // sum_j exp(s_j) * exp(-s_pos); the dot of two scalars is their product.
  Tensor ratio = dot(sum_exp, exp(scale(dot(anchor, positive), -1.0)));
  return log(add(Tensor::scalar(1.0), ratio));
}

Tensor intra_tuplet_loss(const Tensor& anchor, const Tensor& positive,
                         const std::vector<Tensor>& same_class_negatives) {
  return tuplet_loss(anchor, positive, same_class_negatives);
}

Margin margin_of(std::span<const double> p, int y) {
  if (p.size() < 2) throw ContractError("margin_of requires at least two classes");
  if (y < 0 || static_cast<std::size_t>(y) >= p.size())
    throw std::out_of_range("margin_of: label " + std::to_string(y) + " outside [0," +
                            std::to_string(p.size()) + ")");
  double best_other = -1.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (static_cast<int>(i) != y) best_other = std::max(best_other, p[i]);
  return Margin{p[static_cast<std::size_t>(y)] - best_other};
}

Margin margin_of(const Tensor& p, int y) { return margin_of(p.data(), y); }

Tensor gated_intra_loss(const Tensor& anchor, const Tensor& positive,
                        const std::vector<Tensor>& negatives, Margin rho, double delta) {
  if (rho.rho > delta) return intra_tuplet_loss(anchor, positive, negatives);
  return Tensor::scalar(0.0);
}

Tensor teacher_total_loss(const Tensor& ce, const Tensor& intra, double lambda) {
  if (!(lambda > 0.0))
    throw ContractError("teacher_total_loss: lambda must be > 0, got " + std::to_string(lambda));
  return add(ce, scale(intra, lambda));
}

CombinedLoss combined_contrastive_loss(const Tensor& anchor, const Tensor& positive,
                                       const std::vector<Tensor>& inter_negatives,
                                       const std::vector<Tensor>& intra_negatives, double lambda) {
  if (inter_negatives.empty() || intra_negatives.empty())
    throw ContractError("combined_contrastive_loss: both negative sets must be non-empty");
  if (lambda < 0.0)
    throw ContractError("combined_contrastive_loss: lambda must be >= 0");
  CombinedLoss out;
  out.inter = tuplet_loss(anchor, positive, inter_negatives);
  out.intra = tuplet_loss(anchor, positive, intra_negatives);
  out.total = add(out.inter, scale(out.intra, lambda));
  return out;
}

}  // namespace iccd
