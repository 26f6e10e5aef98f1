#pragma once

#include <span>
#include <vector>

#include "iccd/tensor.hpp"

namespace iccd {

// Classification margin: true-class probability minus the best other-class
// probability. Always in [-1, 1].
struct Margin {
  double rho = 0.0;
};

// Throws ContractError unless p is a probability vector (entries >= 0, sum
// within 1e-9 of 1).
void require_simplex(std::span<const double> p, const char* what);

// -sum_i target[i] * log(pred[i]), with log clamped at 1e-12. Vector form.
Tensor cross_entropy(const Tensor& target, const Tensor& pred);

// Batched mean cross-entropy over matching [N,C] matrices.
Tensor cross_entropy_rows_mean(const Tensor& target, const Tensor& pred);

// alpha * CE(y, p_s) + (1 - alpha) * CE(p_t, p_s). Equals CE(q, p_s) with
// q = alpha*y + (1-alpha)*p_t by linearity of CE in its first argument.
Tensor kd_student_loss(const Tensor& y, const Tensor& p_t, const Tensor& p_s, double alpha);

// log(1 + sum_j exp(anchor . neg_j) / exp(anchor . positive))
Tensor tuplet_loss(const Tensor& anchor, const Tensor& positive,
                   const std::vector<Tensor>& negatives);

// Same functional form as tuplet_loss; the caller guarantees the negatives
// share the anchor's class.
Tensor intra_tuplet_loss(const Tensor& anchor, const Tensor& positive,
                         const std::vector<Tensor>& same_class_negatives);

// p[y] - max_{i != y} p[i]. Throws std::out_of_range on a bad label and
// ContractError when p has fewer than two classes.
Margin margin_of(std::span<const double> p, int y);
Margin margin_of(const Tensor& p, int y);

// intra_tuplet_loss when rho > delta (strictly), otherwise a detached zero
// that contributes no gradient to any input.
Tensor gated_intra_loss(const Tensor& anchor, const Tensor& positive,
                        const std::vector<Tensor>& negatives, Margin rho, double delta);

// ce + lambda * intra, lambda > 0.
Tensor teacher_total_loss(const Tensor& ce, const Tensor& intra, double lambda);

struct CombinedLoss {
  Tensor total;
  Tensor inter;
  Tensor intra;
};

// inter + lambda * intra with the inter negatives drawn from other classes
// and the intra negatives from the anchor's class.
CombinedLoss combined_contrastive_loss(const Tensor& anchor, const Tensor& positive,
                                       const std::vector<Tensor>& inter_negatives,
                                       const std::vector<Tensor>& intra_negatives, double lambda);

}  // namespace iccd
