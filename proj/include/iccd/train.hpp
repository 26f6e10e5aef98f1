#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iccd/errors.hpp"
#include "iccd/negcache.hpp"
#include "iccd/nets.hpp"
#include "iccd/synthdata.hpp"

namespace iccd {

struct TrainConfig {
  int epochs = 90;
  int batch_size = 64;
  double lr = 0.1;
  std::vector<int> lr_decay_epochs = {30, 60};
  double lr_decay_factor = 0.1;
  double lambda = 0.02;  // 0 disables the intra-class term entirely
  double delta = 0.1;
  int capacity_m = 8;
  double alpha = 0.1;  // student: weight on the hard-label term
  double aug_strength = 0.1;
  std::uint64_t seed = 1;
  CacheMode cache_mode = CacheMode::drain_and_clear;
  // Bypass the pipeline cache and draw gate-passing negatives from the
  // current batch instead. Kept for comparing the two intra-loss routes.
  bool inline_intra = false;
  std::vector<int> hidden_dims = {64};
  int embed_dim = 16;
};

struct EpochRow {
  int epoch = 0;
  double lr = 0.0;
  double ce = 0.0;         // mean over batches
  double intra = 0.0;      // mean over batches
  double gate_frac = 0.0;  // fraction of samples with rho > delta
  long drains = 0;
  double ms_per_batch = 0.0;
};

struct BatchRow {
  int epoch = 0;
  int batch = 0;
  double ce = 0.0;
  double intra = 0.0;
  double total = 0.0;
};

struct TrainLog {
  std::vector<EpochRow> rows;
  std::vector<BatchRow> batch_rows;  // in-memory only, not serialized
  std::vector<std::vector<ClassQueueStats>> epoch_cache_stats;

  // epoch,lr,ce,intra,gate_frac,drains,ms_per_batch
  void write_csv(const std::string& path) const;
};

struct TrainResult {
  MLPModel model;
  TrainLog log;
};

// Thrown when a loss goes non-finite; message carries epoch, batch and the
// loss components.
class TrainingDiverged : public NumericError {
public:
  using NumericError::NumericError;
};

double lr_at(const TrainConfig& cfg, int epoch);

// Margin-gated intra-class contrastive teacher training: per batch, softmax
// and margins, margin-gated admission of detached embeddings into the
// per-class cache, intra loss over drained negatives with an augmented
// positive, then a plain SGD step on ce + lambda * intra.
TrainResult train_teacher(const Dataset& ds, const TrainConfig& cfg);

// Student trained against frozen teacher soft labels:
// alpha * CE(y, p_s) + (1 - alpha) * CE(p_t, p_s).
TrainResult distill_student(const MLPModel& teacher, const Dataset& ds, const TrainConfig& cfg);

// Evaluation helpers (no gradients).
double accuracy(const MLPModel& model, const Dataset& ds);
double mean_max_prob(const MLPModel& model, const Dataset& ds);
double mean_softlabel_entropy(const MLPModel& model, const Dataset& ds);

struct PairwiseStats {
  double intra_mean = 0.0;  // mean Euclidean distance over same-class embedding pairs
  double inter_mean = 0.0;  // mean over different-class pairs
};
PairwiseStats embedding_pairwise_distances(const MLPModel& model, const Dataset& ds);

// Row-major feature matrix / one-hot label matrix for a set of sample indices.
Tensor gather_features(const Dataset& ds, const std::vector<int>& indices);
Tensor gather_one_hot(const Dataset& ds, const std::vector<int>& indices);

}  // namespace iccd
