#include "iccd/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "iccd/errors.hpp"
#include "iccd/kernels.hpp"
#include "iccd/losses.hpp"
#include "iccd/rng.hpp"

namespace iccd {

namespace {

constexpr std::uint64_t kInitStream = 0x74656163;     // teacher init
constexpr std::uint64_t kStudentStream = 0x73747564;  // student init
constexpr std::uint64_t kEpochStream = 0x65706f63;    // batch shuffling
constexpr std::uint64_t kAugStream = 0x61756721;      // positive augmentation

void validate_config(const TrainConfig& cfg, const Dataset& ds) {
  if (cfg.epochs < 1) throw ContractError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ContractError("train: batch_size must be >= 1");
  if (!(cfg.lr > 0.0)) throw ContractError("train: lr must be > 0");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ContractError("train: alpha must lie in [0,1]");
  if (cfg.lambda < 0.0) throw ContractError("train: lambda must be >= 0");
  if (!(cfg.delta > 0.0)) throw ContractError("train: delta must be > 0");
  if (cfg.capacity_m < 1) throw ContractError("train: capacity_m must be >= 1");
  if (cfg.aug_strength < 0.0) throw ContractError("train: aug_strength must be >= 0");
  if (ds.c < 2) throw ContractError("train: dataset needs at least two classes");
  if (ds.samples.empty()) throw ContractError("train: dataset is empty");
  if (cfg.embed_dim <= ds.c)
    throw ContractError("train: embed_dim must exceed the class count");
}

std::vector<int> model_dims(const TrainConfig& cfg, const Dataset& ds) {
  std::vector<int> dims{ds.d_in};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.embed_dim);
  dims.push_back(ds.c);
  return dims;
}

void sgd_step(MLPModel& model, double lr) {
  for (auto& p : model.parameters()) {
    auto g = p.grad();
    if (g.empty()) continue;
    auto data = p.mutable_data();
    kernels::axpy(-lr, g.data(), data.data(), static_cast<std::int64_t>(data.size()));
    p.zero_grad();
  }
}

Tensor mean_of_terms(const std::vector<Tensor>& terms) {
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return scale(acc, 1.0 / static_cast<double>(terms.size()));
}

[[noreturn]] void report_divergence(int epoch, int batch, double ce, double intra) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "training diverged at epoch %d batch %d: ce=%.6g intra=%.6g", epoch, batch, ce,
                intra);
  throw TrainingDiverged(buf);
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double lr_at(const TrainConfig& cfg, int epoch) {
  if (epoch < 0 || epoch >= cfg.epochs) throw ContractError("lr_at: epoch out of range");
  int decays = 0;
  for (int milestone : cfg.lr_decay_epochs)
    if (epoch >= milestone) ++decays;
  return cfg.lr * std::pow(cfg.lr_decay_factor, decays);
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open train log for writing: " + path);
  out << "epoch,lr,ce,intra,gate_frac,drains,ms_per_batch\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%ld,%.3f\n", r.epoch, r.lr, r.ce,
                  r.intra, r.gate_frac, r.drains, r.ms_per_batch);
    out << buf;
  }
  if (!out) throw IoError("train log write failed: " + path);
}

Tensor gather_features(const Dataset& ds, const std::vector<int>& indices) {
  const int d = ds.d_in;
  std::vector<double> x(indices.size() * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = ds.samples[static_cast<std::size_t>(indices[i])];
    std::copy(s.x.begin(), s.x.end(), x.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return Tensor::from({static_cast<int>(indices.size()), d}, std::move(x), false);
}

Tensor gather_one_hot(const Dataset& ds, const std::vector<int>& indices) {
  std::vector<double> y(indices.size() * static_cast<std::size_t>(ds.c), 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = ds.samples[static_cast<std::size_t>(indices[i])];
    y[i * static_cast<std::size_t>(ds.c) + static_cast<std::size_t>(s.y)] = 1.0;
  }
  return Tensor::from({static_cast<int>(indices.size()), ds.c}, std::move(y), false);
}

TrainResult train_teacher(const Dataset& ds, const TrainConfig& cfg) {
  validate_config(cfg, ds);
  MLPModel model = init_mlp(model_dims(cfg, ds), seed_mix(cfg.seed, kInitStream));
  NegativeCache cache(ds.c, CacheConfig{cfg.capacity_m, cfg.delta, cfg.cache_mode});
  const bool use_intra = cfg.lambda > 0.0;
  const int embed_dim = model.embed_dim();

  TrainLog log;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg, epoch);
    const auto batches = batch_iter(ds, cfg.batch_size, seed_mix(cfg.seed, kEpochStream,
                                                                 static_cast<std::uint64_t>(epoch)));
    double ce_sum = 0.0, intra_sum = 0.0, ms_sum = 0.0;
    long gates_open = 0, samples_seen = 0, drains_epoch = 0;

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto& batch = batches[b];
      const int batch_n = static_cast<int>(batch.size());

      const Tensor x = gather_features(ds, batch);
      const Tensor y = gather_one_hot(ds, batch);
      const ForwardResult fwd = forward_full(model, x);
      const Tensor ce = cross_entropy_rows_mean(y, fwd.probs);

      // Margins are diagnostics in CE-only mode and the admission rule
      // otherwise; either way they come from detached softmax values.
      std::vector<Margin> margins(static_cast<std::size_t>(batch_n));
      for (int i = 0; i < batch_n; ++i) {
        const auto p_row = fwd.probs.data().subspan(static_cast<std::size_t>(i) * ds.c,
                                                    static_cast<std::size_t>(ds.c));
        margins[static_cast<std::size_t>(i)] =
            margin_of(p_row, ds.samples[static_cast<std::size_t>(batch[i])].y);
        if (margins[static_cast<std::size_t>(i)].rho > cfg.delta) ++gates_open;
      }
      samples_seen += batch_n;

      std::vector<Tensor> intra_terms;
      if (use_intra) {
        const Tensor embs = l2_normalize_rows(fwd.embed_pre);
        for (int i = 0; i < batch_n; ++i) {
          const int sample_id = batch[i];
          const int label = ds.samples[static_cast<std::size_t>(sample_id)].y;
          const Margin rho = margins[static_cast<std::size_t>(i)];

          std::vector<Tensor> negatives;
          if (cfg.inline_intra) {
            if (!(rho.rho > cfg.delta)) continue;
            // Gate-passing same-class rows of this batch, anchor excluded.
            for (int j = 0; j < batch_n && static_cast<int>(negatives.size()) < cfg.capacity_m;
                 ++j) {
              if (j == i || ds.samples[static_cast<std::size_t>(batch[j])].y != label) continue;
              if (!(margins[static_cast<std::size_t>(j)].rho > cfg.delta)) continue;
              negatives.push_back(row(embs, j));
            }
          } else {
            const auto emb_row = embs.data().subspan(
                static_cast<std::size_t>(i) * embed_dim, static_cast<std::size_t>(embed_dim));
            const bool admitted = cache.enqueue_if_margin(
                label, {emb_row.begin(), emb_row.end()}, rho, step, sample_id);
            if (!admitted) continue;
            const auto drained = cache.drain_ready(label);
            if (!drained) continue;
            ++drains_epoch;
            for (const auto& entry : *drained) {
              if (entry.sample_id == sample_id) continue;  // never its own negative
              negatives.push_back(Tensor::from({embed_dim}, entry.embedding, false));
            }
          }
          if (negatives.empty()) continue;

          const Tensor anchor = row(embs, i);
          const auto x_plus =
              augment(ds.samples[static_cast<std::size_t>(sample_id)].x, cfg.aug_strength,
                      seed_mix(seed_mix(cfg.seed, kAugStream, static_cast<std::uint64_t>(step)),
                               static_cast<std::uint64_t>(sample_id)));
          const ForwardResult pos_fwd =
              forward_full(model, Tensor::from({1, ds.d_in}, x_plus, false));
          const Tensor positive = row(l2_normalize_rows(pos_fwd.embed_pre), 0);
          intra_terms.push_back(gated_intra_loss(anchor, positive, negatives, rho, cfg.delta));
        }
      }

      const Tensor intra =
          intra_terms.empty() ? Tensor::scalar(0.0) : mean_of_terms(intra_terms);
      const Tensor total = use_intra ? teacher_total_loss(ce, intra, cfg.lambda) : ce;

      const double ce_v = ce.value(), intra_v = intra.value();
      if (!std::isfinite(ce_v) || !std::isfinite(intra_v) || !std::isfinite(total.value()))
        report_divergence(epoch, static_cast<int>(b), ce_v, intra_v);

      backward(total);
      sgd_step(model, lr);
      ++step;

      ce_sum += ce_v;
      intra_sum += intra_v;
      ms_sum += elapsed_ms(t0);
      log.batch_rows.push_back(
          BatchRow{epoch, static_cast<int>(b), ce_v, intra_v, total.value()});
    }

    const auto n_batches = static_cast<double>(batches.size());
    log.rows.push_back(EpochRow{epoch, lr, ce_sum / n_batches, intra_sum / n_batches,
                                static_cast<double>(gates_open) /
                                    static_cast<double>(samples_seen),
                                drains_epoch, ms_sum / n_batches});
    log.epoch_cache_stats.push_back(cache.all_stats());
  }
  return TrainResult{std::move(model), std::move(log)};
}

TrainResult distill_student(const MLPModel& teacher, const Dataset& ds, const TrainConfig& cfg) {
  validate_config(cfg, ds);
  if (teacher.class_count() != ds.c)
    throw ContractError("distill_student: teacher was trained on a different class count");
  MLPModel student = init_mlp(model_dims(cfg, ds), seed_mix(cfg.seed, kStudentStream));

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg, epoch);
    const auto batches = batch_iter(ds, cfg.batch_size, seed_mix(cfg.seed, kEpochStream,
                                                                 static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0, ms_sum = 0.0;

    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto& batch = batches[b];
      const Tensor x = gather_features(ds, batch);
      const Tensor y = gather_one_hot(ds, batch);

      // Teacher soft labels are constants: detach so no gradient (and no
      // update) can ever reach the teacher.
      const Tensor p_t = forward_full(teacher, x).probs.detached();
      const ForwardResult fwd = forward_full(student, x);

      const Tensor loss = add(scale(cross_entropy_rows_mean(y, fwd.probs), cfg.alpha),
                              scale(cross_entropy_rows_mean(p_t, fwd.probs), 1.0 - cfg.alpha));
      const double loss_v = loss.value();
      if (!std::isfinite(loss_v)) report_divergence(epoch, static_cast<int>(b), loss_v, 0.0);

      backward(loss);
      sgd_step(student, lr);
      loss_sum += loss_v;
      ms_sum += elapsed_ms(t0);
      log.batch_rows.push_back(BatchRow{epoch, static_cast<int>(b), loss_v, 0.0, loss_v});
    }

    const auto n_batches = static_cast<double>(batches.size());
    log.rows.push_back(
        EpochRow{epoch, lr, loss_sum / n_batches, 0.0, 0.0, 0, ms_sum / n_batches});
  }
  return TrainResult{std::move(student), std::move(log)};
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

std::vector<int> all_indices(const Dataset& ds) {
  std::vector<int> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return idx;
}

}  // namespace

double accuracy(const MLPModel& model, const Dataset& ds) {
  const Tensor x = gather_features(ds, all_indices(ds));
  const ForwardResult fwd = forward_full(model, x);
  const auto logits = fwd.logits.data();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row_ptr = logits.subspan(i * static_cast<std::size_t>(ds.c),
                                        static_cast<std::size_t>(ds.c));
    int best = 0;
    for (int j = 1; j < ds.c; ++j)
      if (row_ptr[static_cast<std::size_t>(j)] > row_ptr[static_cast<std::size_t>(best)]) best = j;
    if (best == ds.samples[i].y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double mean_max_prob(const MLPModel& model, const Dataset& ds) {
  const ForwardResult fwd = forward_full(model, gather_features(ds, all_indices(ds)));
  const auto probs = fwd.probs.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double mx = 0.0;
    for (int j = 0; j < ds.c; ++j)
      mx = std::max(mx, probs[i * static_cast<std::size_t>(ds.c) + static_cast<std::size_t>(j)]);
    acc += mx;
  }
  return acc / static_cast<double>(ds.size());
}

double mean_softlabel_entropy(const MLPModel& model, const Dataset& ds) {
  const ForwardResult fwd = forward_full(model, gather_features(ds, all_indices(ds)));
  const auto probs = fwd.probs.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double h = 0.0;
    for (int j = 0; j < ds.c; ++j) {
      const double p = probs[i * static_cast<std::size_t>(ds.c) + static_cast<std::size_t>(j)];
      if (p > 0.0) h -= p * std::log(p);
    }
    acc += h;
  }
  return acc / static_cast<double>(ds.size());
}

PairwiseStats embedding_pairwise_distances(const MLPModel& model, const Dataset& ds) {
  const Tensor embs = embed_normalized(model, gather_features(ds, all_indices(ds)));
  const auto e = embs.data();
  const auto dim = static_cast<std::size_t>(model.embed_dim());

  double intra_sum = 0.0, inter_sum = 0.0;
  std::size_t intra_n = 0, inter_n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = e[i * dim + k] - e[j * dim + k];
        d2 += diff * diff;
      }
      const double d = std::sqrt(d2);
      if (ds.samples[i].y == ds.samples[j].y) {
        intra_sum += d;
        ++intra_n;
      } else {
        inter_sum += d;
        ++inter_n;
      }
    }
  }
  PairwiseStats out;
  if (intra_n > 0) out.intra_mean = intra_sum / static_cast<double>(intra_n);
  if (inter_n > 0) out.inter_mean = inter_sum / static_cast<double>(inter_n);
  return out;
}

}  // namespace iccd
