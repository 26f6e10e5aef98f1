#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "iccd/errors.hpp"
#include "iccd/theory.hpp"

using iccd::Dataset;
using iccd::DistanceReport;
using iccd::DistanceTrace;
using iccd::Embedder;
using iccd::GenParams;
using iccd::Sample;

namespace {

Dataset toy_dataset(int classes, int per_class, int d_in = 4) {
  // Class identity is written into x[0] so a test embedder can read it back.
  Dataset ds;
  ds.c = classes;
  ds.views_per_class = 1;
  ds.d_in = d_in;
  for (int k = 0; k < classes; ++k)
    for (int i = 0; i < per_class; ++i) {
      Sample s;
      s.y = k;
      s.view_id = 0;
      s.x.assign(static_cast<std::size_t>(d_in), 0.0);
      s.x[0] = static_cast<double>(k);
      s.x[1] = static_cast<double>(i);
      ds.samples.push_back(std::move(s));
    }
  return ds;
}

Dataset generated(std::uint64_t seed, int classes = 3, int per_view = 12) {
  GenParams p;
  p.classes = classes;
  p.views_per_class = 1;
  p.per_view = per_view;
  p.d_in = 6;
  p.seed = seed;
  return generate_multiview(p);
}

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

TEST_SUITE("theory") {

TEST_CASE("degenerate embedder gives d_intra = d_inter = e") {
  const Dataset ds = toy_dataset(2, 6);
  const Embedder constant = [](const std::vector<double>&) {
    return std::vector<double>{1.0, 0.0, 0.0};
  };
  const DistanceReport r = empirical_distances(constant, ds, 4, 3, 3, 7, 0.01);
  CHECK(r.d_intra == doctest::Approx(std::exp(1.0)).epsilon(1e-13));
  CHECK(r.d_inter == doctest::Approx(std::exp(1.0)).epsilon(1e-13));
  // positive similarity is also 1, so l = log1p(m * e / e)
  CHECK(r.l_intra == doctest::Approx(std::log1p(3.0)).epsilon(1e-13));
}

TEST_CASE("orthogonal one-hot class embedder separates the distances") {
  const Dataset ds = toy_dataset(3, 6);
  const Embedder onehot = [](const std::vector<double>& x) {
    std::vector<double> e(4, 0.0);
    e[static_cast<std::size_t>(std::lround(x[0]))] = 1.0;
    return e;
  };
  // Tiny augmentation keeps the positive inside the class cell.
  const DistanceReport r = empirical_distances(onehot, ds, 6, 4, 4, 11, 1e-6);
  CHECK(r.d_intra == doctest::Approx(std::exp(1.0)).epsilon(1e-13));
  CHECK(r.d_inter == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("report matches a brute-force recomputation from the trace") {
  const Dataset ds = generated(21);
  const Embedder emb = iccd::random_unit_embedder(5, 77);
  DistanceTrace trace;
  const DistanceReport r = empirical_distances(emb, ds, 8, 4, 6, 13, 0.1, &trace);

  REQUIRE(trace.anchor_ids.size() == 8);
  double sum_intra = 0.0, sum_inter = 0.0, sum_pos = 0.0;
  for (std::size_t a = 0; a < trace.anchor_ids.size(); ++a) {
    const auto phi_a = emb(ds.samples[static_cast<std::size_t>(trace.anchor_ids[a])].x);
    for (int idx : trace.intra_ids[a]) {
      CHECK(ds.samples[static_cast<std::size_t>(idx)].y ==
            ds.samples[static_cast<std::size_t>(trace.anchor_ids[a])].y);
      CHECK(idx != trace.anchor_ids[a]);
      sum_intra += std::exp(vdot(phi_a, emb(ds.samples[static_cast<std::size_t>(idx)].x)));
    }
    for (int idx : trace.inter_ids[a]) {
      CHECK(ds.samples[static_cast<std::size_t>(idx)].y !=
            ds.samples[static_cast<std::size_t>(trace.anchor_ids[a])].y);
      sum_inter += std::exp(vdot(phi_a, emb(ds.samples[static_cast<std::size_t>(idx)].x)));
    }
    sum_pos += std::exp(vdot(phi_a, emb(trace.positive_inputs[a])));
  }
  const double a_count = 8.0;
  CHECK(std::abs(r.d_intra - sum_intra / (a_count * 4)) < 1e-12);
  CHECK(std::abs(r.d_inter - sum_inter / (a_count * 6)) < 1e-12);
  CHECK(std::abs(r.l_intra - std::log1p(sum_intra / sum_pos)) < 1e-12);
  CHECK(std::abs(r.l_inter - std::log1p(sum_inter / sum_pos)) < 1e-12);
}

TEST_CASE("the exact finite-sample identity holds on every report") {
  const Dataset ds = generated(22, 3, 20);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    for (auto [m, n] : std::vector<std::pair<int, int>>{{2, 5}, {8, 8}, {12, 3}}) {
      const DistanceReport r =
          empirical_distances(iccd::random_unit_embedder(6, seed), ds, 6, m, n, seed);
      const auto res = theorem1_check(r);
      CHECK(res.exact_residual < 1e-9);
    }
  }
}

TEST_CASE("sampling is deterministic under the seed") {
  const Dataset ds = generated(23);
  const Embedder emb = iccd::random_unit_embedder(5, 3);
  const DistanceReport a = empirical_distances(emb, ds, 5, 3, 4, 99);
  const DistanceReport b = empirical_distances(emb, ds, 5, 3, 4, 99);
  CHECK(a.d_intra == b.d_intra);
  CHECK(a.l_inter == b.l_inter);
}

TEST_CASE("asymptotic form is biased at m = n = 1 with extreme similarities") {
  // Same-class pairs collinear, different-class pairs antipodal.
  const Dataset ds = toy_dataset(2, 2);
  const Embedder signed_emb = [](const std::vector<double>& x) {
    const double sign = x[0] < 0.5 ? 1.0 : -1.0;
    return std::vector<double>{sign, 0.0};
  };
  const DistanceReport r = empirical_distances(signed_emb, ds, 1, 1, 1, 5, 1e-9);
  const auto res = theorem1_check(r);
  CHECK(res.exact_residual < 1e-12);
  CHECK(res.asymptotic_residual > 0.5);  // order 1/e^l, clearly visible
}

TEST_CASE("asymptotic residual shrinks with sample count") {
  const Dataset ds = generated(24, 2, 600);
  const DistanceReport r =
      empirical_distances(iccd::random_unit_embedder(8, 5), ds, 4, 400, 400, 31);
  const auto res = theorem1_check(r);
  CHECK(res.exact_residual < 1e-9);
  CHECK(res.asymptotic_residual < 0.05);
}

TEST_CASE("insufficient samples are rejected") {
  const Dataset ds = toy_dataset(2, 4);
  const Embedder emb = iccd::random_unit_embedder(4, 1);
  CHECK_THROWS_AS(empirical_distances(emb, ds, 2, 4, 2, 1), iccd::ContractError);  // m == class size
  CHECK_THROWS_AS(empirical_distances(emb, ds, 2, 2, 5, 1), iccd::ContractError);  // n too large
  CHECK_THROWS_AS(empirical_distances(emb, ds, 0, 2, 2, 1), iccd::ContractError);
}

TEST_CASE("theorem-2 constants") {
  SUBCASE("m = n collapses c1 and c3 to 1") {
    for (int v : {1, 4, 100}) {
      const auto c = iccd::theorem2_constants(v, v);
      CHECK(c.c1 == 1.0);
      CHECK(c.c3 == 1.0);
    }
  }
  SUBCASE("m = 1 value matches the direct evaluation") {
    const auto c = iccd::theorem2_constants(1, 1);
    const double direct = std::log(1.0 + std::exp(2.0)) / std::log(1.0 + std::exp(-2.0)) - 1.0;
    CHECK(std::abs(c.c0 - direct) < 1e-12);
    CHECK(c.c0 == doctest::Approx(15.757).epsilon(1e-3));
  }
  SUBCASE("positivity and the product identity across a log grid") {
    for (int m = 1; m <= 1000000; m *= 10)
      for (int n = 1; n <= 1000000; n *= 10) {
        const auto c = iccd::theorem2_constants(m, n);
        CHECK(c.c0 > 0.0);
        CHECK(c.c1 > 0.0);
        CHECK(c.c2 > 0.0);
        CHECK(c.c3 > 0.0);
        CHECK(std::abs(c.c1 * c.c3 - 1.0) < 1e-12);
      }
  }
  SUBCASE("domain contract") {
    CHECK_THROWS_AS(iccd::theorem2_constants(0, 1), iccd::ContractError);
  }
}

TEST_CASE("theorem-2 bound evaluation") {
  const auto r = iccd::theorem2_bound_check(0.9, 1.1, 1.0, 8, 8);
  CHECK(r.ratio == doctest::Approx(0.9 / 1.1).epsilon(1e-15));
  CHECK(r.lower <= r.upper);
  CHECK(r.satisfied == (r.lower <= r.ratio && r.ratio <= r.upper));

  SUBCASE("large lambda pushes the lower bound toward zero") {
    const auto tight = iccd::theorem2_bound_check(1.0, 1.0, 1e9, 4, 4);
    CHECK(tight.lower < 1e-8);
  }
  SUBCASE("small lambda blows up the upper bound") {
    const auto loose = iccd::theorem2_bound_check(1.0, 1.0, 1e-9, 4, 4);
    CHECK(loose.upper > 1e8);
  }
  SUBCASE("non-positive inter loss is rejected") {
    CHECK_THROWS_AS(iccd::theorem2_bound_check(1.0, 0.0, 1.0, 4, 4), iccd::ContractError);
  }
}

TEST_CASE("loss lower bounds") {
  const auto b = iccd::loss_lower_bounds(1, 1);
  CHECK(b.inter_lb == doctest::Approx(0.12692801104297263).epsilon(1e-14));
  CHECK(b.intra_lb == doctest::Approx(0.12692801104297263).epsilon(1e-14));
  CHECK_THROWS_AS(iccd::loss_lower_bounds(0, 1), iccd::ContractError);
  const auto b2 = iccd::loss_lower_bounds(16, 4);
  CHECK(b2.inter_lb == doctest::Approx(std::log1p(4 * std::exp(-2.0))).epsilon(1e-14));
  CHECK(b2.intra_lb == doctest::Approx(std::log1p(16 * std::exp(-2.0))).epsilon(1e-14));
}

TEST_CASE("projected gradient descent approaches the tuplet floor") {
  const double floor = std::log1p(1 * std::exp(-2.0));
  const double achieved = iccd::minimize_single_tuplet(1, 4, 42, 3000, 0.5);
  CHECK(achieved >= floor - 1e-9);
  CHECK(achieved - floor < 1e-2);
}

TEST_CASE("free-embedding tradeoff minimization makes progress and satisfies the bounds") {
  iccd::FreeEmbedConfig cfg;
  cfg.classes = 2;
  cfg.per_class = 4;
  cfg.m = 3;
  cfg.n = 3;
  cfg.dim = 6;
  cfg.lambda = 1.0;
  cfg.seed = 9;
  cfg.steps = 400;
  cfg.lr = 0.5;
  const auto out = minimize_tradeoff_free_embeddings(cfg);
  CHECK(std::isfinite(out.l_intra));
  CHECK(std::isfinite(out.l_inter));
  CHECK(out.final_objective < out.initial_objective);
  const auto bounds = iccd::theorem2_bound_check(out.l_intra, out.l_inter, cfg.lambda, cfg.m, cfg.n);
  CHECK(bounds.satisfied);
}

TEST_CASE("lambda sweep aggregates cells per lambda") {
  GenParams p;
  p.classes = 2;
  p.views_per_class = 1;
  p.per_view = 25;
  p.d_in = 6;
  p.seed = 31;
  const Dataset train_ds = generate_multiview(p);
  p.seed = 32;
  const Dataset heldout = generate_multiview(p);

  iccd::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 25;
  cfg.lr = 0.1;
  cfg.lr_decay_epochs = {};
  cfg.delta = 0.05;
  cfg.capacity_m = 3;
  cfg.hidden_dims = {8};
  cfg.embed_dim = 6;

  const auto sweep =
      lambda_sweep(train_ds, heldout, {0.0, 0.05}, cfg, {1ULL, 2ULL, 3ULL});
  CHECK(sweep.cells.size() == 6);
  REQUIRE(sweep.summary.size() == 2);
  CHECK(sweep.summary[0].lambda == 0.0);
  CHECK(sweep.summary[0].cells == 3);
  CHECK(sweep.summary[0].diverged_cells == 0);
  for (const auto& cell : sweep.cells) {
    CHECK_FALSE(cell.diverged);
    CHECK(std::isfinite(cell.entropy));
    CHECK(cell.intra_pairwise >= 0.0);
    CHECK(cell.student_acc >= 0.0);
  }
  CHECK(sweep.overhead_ratio > 0.0);

  SUBCASE("preconditions") {
    CHECK_THROWS_AS(lambda_sweep(train_ds, heldout, {0.01, 0.05}, cfg, {1ULL, 2ULL, 3ULL}),
                    iccd::ContractError);  // missing 0 control
    CHECK_THROWS_AS(lambda_sweep(train_ds, heldout, {0.0, 0.05}, cfg, {1ULL, 2ULL}),
                    iccd::ContractError);  // too few seeds
  }

  SUBCASE("diverged cells are flagged, not dropped") {
    Dataset poisoned = train_ds;
    poisoned.samples[0].x[0] = std::numeric_limits<double>::infinity();
    const auto flagged = lambda_sweep(poisoned, heldout, {0.0, 0.05}, cfg, {1ULL, 2ULL, 3ULL});
    CHECK(flagged.cells.size() == 6);
    int diverged = 0;
    for (const auto& cell : flagged.cells)
      if (cell.diverged) ++diverged;
    CHECK(diverged == 6);
    CHECK(flagged.summary[0].diverged_cells == 3);
  }
}

}  // TEST_SUITE
