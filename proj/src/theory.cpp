#include "iccd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "iccd/errors.hpp"
#include "iccd/losses.hpp"
#include "iccd/rng.hpp"

namespace iccd {

namespace {

constexpr std::uint64_t kAnchorStream = 0x616e6368;
constexpr std::uint64_t kPosStream = 0x706f7321;
constexpr std::uint64_t kFreeInitStream = 0x66726565;
constexpr std::uint64_t kNegSetStream = 0x6e656773;

double sq_exp2() { return std::exp(2.0); }

std::vector<double> unit_normal_vector(Rng& rng, int dim) {
  std::vector<double> v = rng.normal_vector(static_cast<std::size_t>(dim));
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  while (norm < 1e-12) {  // astronomically unlikely; redraw deterministically
    v = rng.normal_vector(static_cast<std::size_t>(dim));
    norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
  }
  for (double& x : v) x /= norm;
  return v;
}

double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

Embedder model_embedder(const MLPModel& model) {
  // Capture by value: the evaluation snapshot must not move under the caller.
  return [model](const std::vector<double>& x) {
    const Tensor xt = Tensor::from({1, static_cast<int>(x.size())}, x, false);
    const Tensor e = embed_normalized(model, xt);
    return std::vector<double>(e.data().begin(), e.data().end());
  };
}

Embedder random_unit_embedder(int dim, std::uint64_t seed) {
  return [dim, seed](const std::vector<double>& x) {
    // FNV-1a over the raw input bytes keys the per-sample stream.
    std::uint64_t h = 14695981039346656037ULL ^ seed;
    for (double v : x) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 1099511628211ULL;
      }
    }
    Rng rng(h);
    return unit_normal_vector(rng, dim);
  };
}

DistanceReport empirical_distances(const Embedder& embedder, const Dataset& ds, int anchors, int m,
                                   int n, std::uint64_t seed, double aug_strength,
                                   DistanceTrace* trace) {
  if (anchors < 1 || m < 1 || n < 1)
    throw ContractError("empirical_distances: anchors, m, n must be >= 1");
  if (anchors > static_cast<int>(ds.size()))
    throw ContractError("empirical_distances: more anchors than samples");
  for (int k = 0; k < ds.c; ++k) {
    const auto cls = ds.class_indices(k);
    if (static_cast<int>(cls.size()) <= m)
      throw ContractError("empirical_distances: class " + std::to_string(k) +
                          " has too few samples for m=" + std::to_string(m));
    if (static_cast<int>(ds.size() - cls.size()) < n)
      throw ContractError("empirical_distances: too few other-class samples for n=" +
                          std::to_string(n));
  }

  Rng rng(seed_mix(seed, kAnchorStream));
  const auto anchor_ids =
      rng.sample_without_replacement(ds.size(), static_cast<std::size_t>(anchors));

  double sum_exp_intra = 0.0, sum_exp_inter = 0.0, sum_exp_pos = 0.0;
  for (std::size_t a = 0; a < anchor_ids.size(); ++a) {
    const auto anchor_idx = anchor_ids[a];
    const auto& anchor_sample = ds.samples[anchor_idx];
    const auto phi_a = embedder(anchor_sample.x);

    // Same-class pool excludes the anchor itself.
    std::vector<int> intra_pool = ds.class_indices(anchor_sample.y);
    intra_pool.erase(
        std::remove(intra_pool.begin(), intra_pool.end(), static_cast<int>(anchor_idx)),
        intra_pool.end());
    std::vector<int> inter_pool;
    inter_pool.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.samples[i].y != anchor_sample.y) inter_pool.push_back(static_cast<int>(i));

    std::vector<int> intra_picked, inter_picked;
    for (const auto pick :
         rng.sample_without_replacement(intra_pool.size(), static_cast<std::size_t>(m))) {
      const int idx = intra_pool[pick];
      intra_picked.push_back(idx);
      sum_exp_intra +=
          std::exp(vec_dot(phi_a, embedder(ds.samples[static_cast<std::size_t>(idx)].x)));
    }
    for (const auto pick :
         rng.sample_without_replacement(inter_pool.size(), static_cast<std::size_t>(n))) {
      const int idx = inter_pool[pick];
      inter_picked.push_back(idx);
      sum_exp_inter +=
          std::exp(vec_dot(phi_a, embedder(ds.samples[static_cast<std::size_t>(idx)].x)));
    }

    const auto x_plus =
        augment(anchor_sample.x, aug_strength, seed_mix(seed, kPosStream, anchor_idx));
    sum_exp_pos += std::exp(vec_dot(phi_a, embedder(x_plus)));

    if (trace) {
      trace->anchor_ids.push_back(static_cast<int>(anchor_idx));
      trace->intra_ids.push_back(std::move(intra_picked));
      trace->inter_ids.push_back(std::move(inter_picked));
      trace->positive_inputs.push_back(x_plus);
    }
  }

  DistanceReport report;
  report.m = m;
  report.n = n;
  report.k = static_cast<double>(n) / static_cast<double>(m);
  report.anchors = anchors;
  const double a_count = static_cast<double>(anchors);
  report.d_intra = sum_exp_intra / (a_count * m);
  report.d_inter = sum_exp_inter / (a_count * n);
  report.l_intra = std::log1p(sum_exp_intra / sum_exp_pos);
  report.l_inter = std::log1p(sum_exp_inter / sum_exp_pos);
  return report;
}

Theorem1Residuals theorem1_check(const DistanceReport& report) {
  const double lhs = report.d_intra / report.d_inter;
  const double exact = report.k * std::expm1(report.l_intra) / std::expm1(report.l_inter);
  const double asym = report.k * std::exp(report.l_intra - report.l_inter);
  Theorem1Residuals out;
  out.exact_residual = std::abs(lhs - exact) / lhs;
  out.asymptotic_residual = std::abs(lhs - asym) / lhs;
  return out;
}

Theorem2Constants theorem2_constants(int m, int n) {
  if (m < 1 || n < 1) throw ContractError("theorem2_constants: m, n must be >= 1");
  const double e2 = sq_exp2();
  const double inv_e2 = 1.0 / e2;
  const double log_m_hot = std::log1p(m * e2);
  const double log_m_cold = std::log1p(m * inv_e2);
  const double log_n_hot = std::log1p(n * e2);
  const double log_n_cold = std::log1p(n * inv_e2);
  Theorem2Constants c;
  c.c0 = log_m_hot / log_m_cold - 1.0;
  c.c1 = log_n_cold / log_m_cold;
  c.c2 = log_n_hot / log_n_cold - 1.0;
  c.c3 = log_m_cold / log_n_cold;
  return c;
}

BoundReport theorem2_bound_check(double l_intra, double l_inter, double lambda, int m, int n) {
  if (!(l_inter > 0.0))
    throw ContractError("theorem2_bound_check: l_inter must be positive, got " +
                        std::to_string(l_inter));
  if (!(lambda > 0.0)) throw ContractError("theorem2_bound_check: lambda must be > 0");
  const auto c = theorem2_constants(m, n);
  BoundReport r;
  r.lambda = lambda;
  r.ratio = l_intra / l_inter;
  r.lower = 1.0 / (c.c0 * lambda + c.c1);
  r.upper = c.c2 / lambda + c.c3;
  r.c0 = c.c0;
  r.c1 = c.c1;
  r.c2 = c.c2;
  r.c3 = c.c3;
  r.satisfied = r.lower <= r.ratio && r.ratio <= r.upper;
  return r;
}

LossLowerBounds loss_lower_bounds(int m, int n) {
  if (m < 1 || n < 1) throw ContractError("loss_lower_bounds: m, n must be >= 1");
  const double inv_e2 = std::exp(-2.0);
  return LossLowerBounds{std::log1p(n * inv_e2), std::log1p(m * inv_e2)};
}

// ---------------------------------------------------------------------------
// free-embedding minimizers

namespace {

void project_to_sphere(Tensor& t) {
  auto data = t.mutable_data();
  double norm = 0.0;
  for (double v : data) norm += v * v;
  norm = std::sqrt(norm);
  if (norm < 1e-12) {
    // Collapsed to the origin: reset to a fixed axis rather than divide by ~0.
    std::fill(data.begin(), data.end(), 0.0);
    data[0] = 1.0;
    return;
  }
  for (auto& v : data) v /= norm;
}

void pgd_step(std::vector<Tensor>& params, double lr) {
  for (auto& p : params) {
    auto g = p.grad();
    if (!g.empty()) {
      auto data = p.mutable_data();
      for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * g[i];
    }
    p.zero_grad();
    project_to_sphere(p);
  }
}

}  // namespace

FreeEmbedResult minimize_tradeoff_free_embeddings(const FreeEmbedConfig& cfg) {
  if (cfg.classes < 2 || cfg.per_class < 2)
    throw ContractError("minimize_tradeoff_free_embeddings: need >= 2 classes and >= 2 per class");
  if (cfg.m < 1 || cfg.n < 1 || cfg.dim < 2 || cfg.steps < 1 || !(cfg.lr > 0.0) ||
      !(cfg.lambda > 0.0))
    throw ContractError("minimize_tradeoff_free_embeddings: invalid configuration");

  const int total = cfg.classes * cfg.per_class;
  Rng init_rng(seed_mix(cfg.seed, kFreeInitStream));
  std::vector<Tensor> emb, pos;
  emb.reserve(static_cast<std::size_t>(total));
  pos.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    emb.push_back(Tensor::from({cfg.dim}, unit_normal_vector(init_rng, cfg.dim), true));
    pos.push_back(Tensor::from({cfg.dim}, unit_normal_vector(init_rng, cfg.dim), true));
  }

  // Fixed seeded negative index sets, drawn with replacement.
  Rng negs_rng(seed_mix(cfg.seed, kNegSetStream));
  std::vector<std::vector<int>> intra_sets(static_cast<std::size_t>(total));
  std::vector<std::vector<int>> inter_sets(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const int my_class = i / cfg.per_class;
    std::vector<int> same, other;
    for (int j = 0; j < total; ++j) {
      if (j == i) continue;
      (j / cfg.per_class == my_class ? same : other).push_back(j);
    }
    for (int k = 0; k < cfg.m; ++k)
      intra_sets[static_cast<std::size_t>(i)].push_back(
          same[static_cast<std::size_t>(negs_rng.below(same.size()))]);
    for (int k = 0; k < cfg.n; ++k)
      inter_sets[static_cast<std::size_t>(i)].push_back(
          other[static_cast<std::size_t>(negs_rng.below(other.size()))]);
  }

  std::vector<Tensor> params;
  params.reserve(2 * static_cast<std::size_t>(total));
  for (auto& t : emb) params.push_back(t);
  for (auto& t : pos) params.push_back(t);

  auto build_losses = [&](double* inter_mean, double* intra_mean) -> Tensor {
    std::vector<Tensor> inter_terms, intra_terms;
    inter_terms.reserve(static_cast<std::size_t>(total));
    intra_terms.reserve(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) {
      std::vector<Tensor> inter_negs, intra_negs;
      for (int j : inter_sets[static_cast<std::size_t>(i)])
        inter_negs.push_back(emb[static_cast<std::size_t>(j)]);
      for (int j : intra_sets[static_cast<std::size_t>(i)])
        intra_negs.push_back(emb[static_cast<std::size_t>(j)]);
      const auto combined =
          combined_contrastive_loss(emb[static_cast<std::size_t>(i)],
                                    pos[static_cast<std::size_t>(i)], inter_negs, intra_negs, 0.0);
      inter_terms.push_back(combined.inter);
      intra_terms.push_back(combined.intra);
    }
    Tensor inter_acc = inter_terms.front();
    Tensor intra_acc = intra_terms.front();
    for (int i = 1; i < total; ++i) {
      inter_acc = add(inter_acc, inter_terms[static_cast<std::size_t>(i)]);
      intra_acc = add(intra_acc, intra_terms[static_cast<std::size_t>(i)]);
    }
    inter_acc = scale(inter_acc, 1.0 / total);
    intra_acc = scale(intra_acc, 1.0 / total);
    if (inter_mean) *inter_mean = inter_acc.value();
    if (intra_mean) *intra_mean = intra_acc.value();
    return add(inter_acc, scale(intra_acc, cfg.lambda));
  };

  FreeEmbedResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    double inter_v = 0.0, intra_v = 0.0;
    Tensor objective = build_losses(&inter_v, &intra_v);
    if (step == 0) result.initial_objective = objective.value();
    backward(objective);
    pgd_step(params, cfg.lr);
  }
  Tensor final_obj = build_losses(&result.l_inter, &result.l_intra);
  result.final_objective = final_obj.value();
  result.ratio = result.l_intra / result.l_inter;
  return result;
}

double minimize_single_tuplet(int n_negatives, int dim, std::uint64_t seed, int steps, double lr) {
  if (n_negatives < 1 || dim < 2) throw ContractError("minimize_single_tuplet: bad arguments");
  Rng rng(seed_mix(seed, kFreeInitStream));
  Tensor anchor = Tensor::from({dim}, unit_normal_vector(rng, dim), true);
  Tensor positive = Tensor::from({dim}, unit_normal_vector(rng, dim), true);
  std::vector<Tensor> negs;
  for (int i = 0; i < n_negatives; ++i)
    negs.push_back(Tensor::from({dim}, unit_normal_vector(rng, dim), true));

  std::vector<Tensor> params{anchor, positive};
  for (auto& t : negs) params.push_back(t);

  for (int step = 0; step < steps; ++step) {
    Tensor loss = tuplet_loss(anchor, positive, negs);
    backward(loss);
    pgd_step(params, lr);
  }
  return tuplet_loss(anchor, positive, negs).value();
}

// ---------------------------------------------------------------------------
// lambda sweep

namespace {

struct Welford {
  double mean = 0.0;
  double m2 = 0.0;
  int n = 0;
  void push(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double std() const { return n > 1 ? std::sqrt(m2 / (n - 1)) : 0.0; }
};

}  // namespace

SweepResult lambda_sweep(const Dataset& train_ds, const Dataset& heldout_ds,
                         const std::vector<double>& lambdas, const TrainConfig& base_cfg,
                         const std::vector<std::uint64_t>& seeds) {
  if (lambdas.size() < 2 || std::find(lambdas.begin(), lambdas.end(), 0.0) == lambdas.end())
    throw ContractError("lambda_sweep: need >= 2 lambdas including a 0 control");
  if (seeds.size() < 3) throw ContractError("lambda_sweep: need >= 3 seeds");

  SweepResult result;
  for (double lam : lambdas) {
    Welford intra_w, inter_w, entropy_w, acc_w, ms_w;
    int diverged = 0;
    for (auto seed : seeds) {
      TrainConfig cfg = base_cfg;
      cfg.lambda = lam;
      cfg.seed = seed;
      SweepCell cell;
      cell.lambda = lam;
      cell.seed = seed;
      try {
        const TrainResult teacher = train_teacher(train_ds, cfg);
        const PairwiseStats stats = embedding_pairwise_distances(teacher.model, heldout_ds);
        cell.intra_pairwise = stats.intra_mean;
        cell.inter_pairwise = stats.inter_mean;
        cell.entropy = mean_softlabel_entropy(teacher.model, heldout_ds);
        double ms = 0.0;
        for (const auto& r : teacher.log.rows) ms += r.ms_per_batch;
        cell.teacher_ms_per_batch = ms / static_cast<double>(teacher.log.rows.size());

        const TrainResult student = distill_student(teacher.model, train_ds, cfg);
        cell.student_acc = accuracy(student.model, heldout_ds);
      } catch (const TrainingDiverged&) {
        cell.diverged = true;
      }
      if (cell.diverged) {
        ++diverged;
      } else {
        intra_w.push(cell.intra_pairwise);
        inter_w.push(cell.inter_pairwise);
        entropy_w.push(cell.entropy);
        acc_w.push(cell.student_acc);
        ms_w.push(cell.teacher_ms_per_batch);
      }
      result.cells.push_back(cell);
    }
    SweepSummaryRow row;
    row.lambda = lam;
    row.intra_mean = intra_w.mean;
    row.intra_std = intra_w.std();
    row.inter_mean = inter_w.mean;
    row.inter_std = inter_w.std();
    row.entropy_mean = entropy_w.mean;
    row.entropy_std = entropy_w.std();
    row.acc_mean = acc_w.mean;
    row.acc_std = acc_w.std();
    row.ms_mean = ms_w.mean;
    row.cells = static_cast<int>(seeds.size());
    row.diverged_cells = diverged;
    result.summary.push_back(row);
  }

  double control_ms = 0.0, intra_ms = 0.0;
  int control_rows = 0, intra_rows = 0;
  for (const auto& row : result.summary) {
    if (row.lambda == 0.0) {
      control_ms += row.ms_mean;
      ++control_rows;
    } else {
      intra_ms += row.ms_mean;
      ++intra_rows;
    }
  }
  if (control_rows > 0 && intra_rows > 0 && control_ms > 0.0)
    result.overhead_ratio = (intra_ms / intra_rows) / (control_ms / control_rows);
  return result;
}

}  // namespace iccd
