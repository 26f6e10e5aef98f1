#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "iccd/errors.hpp"
#include "iccd/synthdata.hpp"

using iccd::Dataset;
using iccd::GenParams;

namespace {

bool datasets_bit_equal(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.samples[i].y != b.samples[i].y || a.samples[i].view_id != b.samples[i].view_id)
      return false;
    if (std::memcmp(a.samples[i].x.data(), b.samples[i].x.data(),
                    a.samples[i].x.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("synthdata") {

TEST_CASE("zero-noise limit puts lone samples on their class centers") {
  GenParams p;
  p.classes = 2;
  p.views_per_class = 1;
  p.per_view = 1;
  p.d_in = 4;
  p.class_sep = 6.0;
  p.view_sep = 2.0;
  p.noise = 1e-9;
  const Dataset ds = generate_multiview(p);
  REQUIRE(ds.size() == 2);
  const double scale = 6.0 / std::numbers::sqrt2;
  for (int k = 0; k < 2; ++k) {
    const auto& x = ds.samples[static_cast<std::size_t>(k)].x;
    for (int j = 0; j < 4; ++j) {
      const double expected = (j == k) ? scale : 0.0;
      CHECK(std::abs(x[static_cast<std::size_t>(j)] - expected) < 1e-7);
    }
  }
}

TEST_CASE("class centers are pairwise separated by class_sep") {
  GenParams p;
  p.classes = 4;
  p.views_per_class = 1;
  p.per_view = 1;
  p.d_in = 8;
  p.noise = 1e-9;
  const Dataset ds = generate_multiview(p);
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      double d2 = 0.0;
      for (int j = 0; j < 8; ++j) {
        const double diff = ds.view_centers[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] -
                            ds.view_centers[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)];
        d2 += diff * diff;
      }
      CHECK(std::sqrt(d2) >= p.class_sep - 1e-9);
    }
}

TEST_CASE("view centers within a class are pairwise separated by view_sep") {
  GenParams p;
  p.classes = 2;
  p.views_per_class = 3;
  p.per_view = 2;
  p.d_in = 8;
  const Dataset ds = generate_multiview(p);
  for (int k = 0; k < p.classes; ++k)
    for (int v = 0; v < 3; ++v)
      for (int w = v + 1; w < 3; ++w) {
        const auto& cv = ds.view_centers[static_cast<std::size_t>(k * 3 + v)];
        const auto& cw = ds.view_centers[static_cast<std::size_t>(k * 3 + w)];
        double d2 = 0.0;
        for (int j = 0; j < 8; ++j)
          d2 += (cv[static_cast<std::size_t>(j)] - cw[static_cast<std::size_t>(j)]) *
                (cv[static_cast<std::size_t>(j)] - cw[static_cast<std::size_t>(j)]);
        CHECK(std::sqrt(d2) == doctest::Approx(p.view_sep).epsilon(1e-9));
      }
}

TEST_CASE("same seed regenerates bit-identical data") {
  GenParams p;
  p.seed = 777;
  CHECK(datasets_bit_equal(generate_multiview(p), generate_multiview(p)));
}

TEST_CASE("per-class sample mean tracks the mean of its view centers") {
  GenParams p;
  p.classes = 4;
  p.views_per_class = 3;
  p.per_view = 50;
  p.d_in = 8;
  p.noise = 0.4;
  p.seed = 11;
  const Dataset ds = generate_multiview(p);
  const double tol = 3.0 * p.noise / std::sqrt(150.0);
  for (int k = 0; k < 4; ++k) {
    std::vector<double> center_mean(8, 0.0), sample_mean(8, 0.0);
    for (int v = 0; v < 3; ++v)
      for (int j = 0; j < 8; ++j)
        center_mean[static_cast<std::size_t>(j)] +=
            ds.view_centers[static_cast<std::size_t>(k * 3 + v)][static_cast<std::size_t>(j)] / 3.0;
    const auto idx = ds.class_indices(k);
    REQUIRE(idx.size() == 150);
    for (int i : idx)
      for (int j = 0; j < 8; ++j)
        sample_mean[static_cast<std::size_t>(j)] +=
            ds.samples[static_cast<std::size_t>(i)].x[static_cast<std::size_t>(j)] / 150.0;
    for (int j = 0; j < 8; ++j)
      CHECK(std::abs(sample_mean[static_cast<std::size_t>(j)] -
                     center_mean[static_cast<std::size_t>(j)]) < tol);
  }
}

TEST_CASE("class-conditional covariance is isotropic within sampling error") {
  GenParams p;
  p.classes = 2;
  p.views_per_class = 1;
  p.per_view = 400;
  p.d_in = 6;
  p.noise = 0.5;
  p.seed = 3;
  const Dataset ds = generate_multiview(p);
  const double var = p.noise * p.noise;
  for (int k = 0; k < 2; ++k) {
    const auto idx = ds.class_indices(k);
    std::vector<double> mean(6, 0.0);
    for (int i : idx)
      for (int j = 0; j < 6; ++j)
        mean[static_cast<std::size_t>(j)] +=
            ds.samples[static_cast<std::size_t>(i)].x[static_cast<std::size_t>(j)] /
            static_cast<double>(idx.size());
    for (int a = 0; a < 6; ++a)
      for (int b = a; b < 6; ++b) {
        double cov = 0.0;
        for (int i : idx)
          cov += (ds.samples[static_cast<std::size_t>(i)].x[static_cast<std::size_t>(a)] -
                  mean[static_cast<std::size_t>(a)]) *
                 (ds.samples[static_cast<std::size_t>(i)].x[static_cast<std::size_t>(b)] -
                  mean[static_cast<std::size_t>(b)]) /
                 static_cast<double>(idx.size() - 1);
        const double expected = (a == b) ? var : 0.0;
        CHECK(std::abs(cov - expected) < 0.2 * var);
      }
  }
}

TEST_CASE("infeasible separation structure is rejected") {
  GenParams p;
  p.classes = 5;
  p.d_in = 3;
  CHECK_THROWS_AS(generate_multiview(p), iccd::ContractError);
  p.classes = 2;
  p.views_per_class = 7;
  CHECK_THROWS_AS(generate_multiview(p), iccd::ContractError);
  p.views_per_class = 2;
  p.view_sep = 10.0;  // violates class_sep > view_sep
  CHECK_THROWS_AS(generate_multiview(p), iccd::ContractError);
}

TEST_CASE("augment with zero strength is the identity") {
  const std::vector<double> x{1.0, -2.0, 3.5};
  CHECK(iccd::augment(x, 0.0, 99) == x);
}

TEST_CASE("augment is reproducible under a fixed seed") {
  const std::vector<double> x{0.5, 0.25};
  CHECK(iccd::augment(x, 0.3, 42) == iccd::augment(x, 0.3, 42));
  CHECK(iccd::augment(x, 0.3, 42) != iccd::augment(x, 0.3, 43));
}

TEST_CASE("augment displacement concentrates near strength * sqrt(d)") {
  const int d = 32, trials = 2000;
  const double strength = 0.1;
  const std::vector<double> x(static_cast<std::size_t>(d), 1.0);
  double mean_norm = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto xp = iccd::augment(x, strength, 1000 + static_cast<std::uint64_t>(t));
    double d2 = 0.0;
    for (int j = 0; j < d; ++j)
      d2 += (xp[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(j)]) *
            (xp[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(j)]);
    mean_norm += std::sqrt(d2) / trials;
  }
  CHECK(std::abs(mean_norm - strength * std::sqrt(32.0)) < 0.01);
}

TEST_CASE("batch_iter covers every index exactly once") {
  GenParams p;
  p.classes = 2;
  p.views_per_class = 1;
  p.per_view = 5;
  p.d_in = 4;
  const Dataset ds = generate_multiview(p);

  SUBCASE("single full batch is a permutation") {
    const auto batches = batch_iter(ds, 10, 5);
    REQUIRE(batches.size() == 1);
    std::set<int> seen(batches[0].begin(), batches[0].end());
    CHECK(seen.size() == 10);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 9);
  }
  SUBCASE("uneven split leaves a short tail batch") {
    const auto batches = batch_iter(ds, 4, 5);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 4);
    CHECK(batches[1].size() == 4);
    CHECK(batches[2].size() == 2);
    std::set<int> seen;
    for (const auto& b : batches) seen.insert(b.begin(), b.end());
    CHECK(seen.size() == 10);
  }
  SUBCASE("different epoch seeds give different permutations") {
    int differing = 0;
    for (int s = 0; s < 100; ++s) {
      const auto a = batch_iter(ds, 10, static_cast<std::uint64_t>(2 * s));
      const auto b = batch_iter(ds, 10, static_cast<std::uint64_t>(2 * s + 1));
      if (a[0] != b[0]) ++differing;
    }
    CHECK(differing >= 99);
  }
}

TEST_CASE("csv round-trip is exact") {
  GenParams p;
  p.classes = 3;
  p.views_per_class = 2;
  p.per_view = 4;
  p.d_in = 5;
  p.seed = 123;
  const Dataset ds = generate_multiview(p);
  const std::string path = "synthdata_roundtrip_test.csv";
  save_csv(ds, path);
  const Dataset back = iccd::load_csv(path);
  CHECK(back.c == ds.c);
  CHECK(back.views_per_class == ds.views_per_class);
  CHECK(back.d_in == ds.d_in);
  CHECK(datasets_bit_equal(ds, back));

  // Re-serialization is byte-identical.
  const std::string path2 = "synthdata_roundtrip_test2.csv";
  save_csv(back, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("load_csv rejects missing and malformed files") {
  CHECK_THROWS_AS(iccd::load_csv("definitely_not_here.csv"), iccd::IoError);
}

}  // TEST_SUITE
