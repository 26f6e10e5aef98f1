#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "iccd/synthdata.hpp"
#include "iccd/train.hpp"

namespace iccd {

// Maps an input vector to a unit-norm embedding.
using Embedder = std::function<std::vector<double>(const std::vector<double>&)>;

Embedder model_embedder(const MLPModel& model);

// Deterministic "random" embedder: each distinct input hashes to an
// independent seeded unit vector. Used to evaluate identities on random
// unit embeddings.
Embedder random_unit_embedder(int dim, std::uint64_t seed);

// Empirical exp-similarity means and the paired contrastive losses measured
// on the same seeded sample sets.
struct DistanceReport {
  double d_intra = 0.0;  // mean exp-similarity to same-class negatives
  double d_inter = 0.0;  // mean exp-similarity to other-class negatives
  double l_intra = 0.0;
  double l_inter = 0.0;
  int m = 0;
  int n = 0;
  double k = 0.0;  // n / m
  int anchors = 0;
};

// The sampled sets behind a DistanceReport, for independent recomputation.
struct DistanceTrace {
  std::vector<int> anchor_ids;
  std::vector<std::vector<int>> intra_ids;           // per anchor, m indices
  std::vector<std::vector<int>> inter_ids;           // per anchor, n indices
  std::vector<std::vector<double>> positive_inputs;  // per anchor, augmented x
};

// For each seeded anchor: m same-class negatives and n other-class negatives
// without replacement, plus one augmented positive. Losses pool anchors by
// summing exp-similarities over all anchors and normalizing by the pooled
// positive term, which reduces to the plain tuplet loss for a single anchor
// and keeps the finite-sample distance identity exact for any anchor count.
DistanceReport empirical_distances(const Embedder& embedder, const Dataset& ds, int anchors, int m,
                                   int n, std::uint64_t seed, double aug_strength = 0.1,
                                   DistanceTrace* trace = nullptr);

struct Theorem1Residuals {
  // | d_ratio - K*(e^{l_intra}-1)/(e^{l_inter}-1) | / d_ratio; algebraically
  // zero up to rounding.
  double exact_residual = 0.0;
  // Same with the -1 dropped (the large-sample limit form).
  double asymptotic_residual = 0.0;
};
Theorem1Residuals theorem1_check(const DistanceReport& report);

// Closed-form positive constants of the loss-ratio bounds; c1 * c3 == 1 by
// construction.
struct Theorem2Constants {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
};
Theorem2Constants theorem2_constants(int m, int n);

struct BoundReport {
  double lambda = 0.0;
  double ratio = 0.0;  // l_intra / l_inter
  double lower = 0.0;  // 1 / (c0*lambda + c1)
  double upper = 0.0;  // c2/lambda + c3
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
  bool satisfied = false;
};
BoundReport theorem2_bound_check(double l_intra, double l_inter, double lambda, int m, int n);

// (log(1 + n e^-2), log(1 + m e^-2)): floors of the inter and intra losses
// over unit-norm inputs.
struct LossLowerBounds {
  double inter_lb = 0.0;
  double intra_lb = 0.0;
};
LossLowerBounds loss_lower_bounds(int m, int n);

// Projected-gradient minimization of inter + lambda * intra over free unit
// embeddings (every sample and every positive is an independent parameter on
// the sphere). Approximates the hypothesis-space minimizer the loss-ratio
// bounds quantify over.
struct FreeEmbedConfig {
  int classes = 4;
  int per_class = 8;
  int m = 8;
  int n = 8;
  int dim = 8;
  double lambda = 1.0;
  std::uint64_t seed = 1;
  int steps = 1500;
  double lr = 0.5;
};

struct FreeEmbedResult {
  double l_intra = 0.0;  // mean per-anchor intra loss at the final iterate
  double l_inter = 0.0;
  double ratio = 0.0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

FreeEmbedResult minimize_tradeoff_free_embeddings(const FreeEmbedConfig& cfg);

// Minimizes one tuplet loss over free unit vectors (anchor, positive, n
// negatives); converges toward the log(1 + n e^-2) floor. Returns the final
// loss value.
double minimize_single_tuplet(int n_negatives, int dim, std::uint64_t seed, int steps = 4000,
                              double lr = 0.5);

// ---------------------------------------------------------------------------
// lambda sweep

struct SweepCell {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double intra_pairwise = 0.0;  // held-out mean same-class embedding distance
  double inter_pairwise = 0.0;
  double entropy = 0.0;  // held-out teacher soft-label entropy
  double student_acc = 0.0;
  double teacher_ms_per_batch = 0.0;
  bool diverged = false;
};

struct SweepSummaryRow {
  double lambda = 0.0;
  double intra_mean = 0.0, intra_std = 0.0;
  double inter_mean = 0.0, inter_std = 0.0;
  double entropy_mean = 0.0, entropy_std = 0.0;
  double acc_mean = 0.0, acc_std = 0.0;
  double ms_mean = 0.0;
  int cells = 0;
  int diverged_cells = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<SweepSummaryRow> summary;
  // mean ms/batch of the intra-enabled cells over the lambda=0 control.
  double overhead_ratio = 0.0;
};

// Trains one teacher per (lambda, seed) cell, measures embedding dispersion
// and soft-label entropy on held-out data, distills a student, and aggregates
// per lambda. Requires at least two lambdas including a 0 control and at
// least three seeds. Diverged cells are flagged, never dropped.
SweepResult lambda_sweep(const Dataset& train_ds, const Dataset& heldout_ds,
                         const std::vector<double>& lambdas, const TrainConfig& base_cfg,
                         const std::vector<std::uint64_t>& seeds);

}  // namespace iccd
