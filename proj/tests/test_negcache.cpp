#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "iccd/errors.hpp"
#include "iccd/negcache.hpp"
#include "iccd/rng.hpp"

using iccd::CacheConfig;
using iccd::CacheMode;
using iccd::Margin;
using iccd::NegativeCache;

namespace {

std::vector<double> unit_embedding(iccd::Rng& rng, int dim = 4) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

TEST_SUITE("negcache") {

TEST_CASE("admission is gated strictly on the margin") {
  iccd::Rng rng(1);
  NegativeCache cache(3, CacheConfig{5, 0.5, CacheMode::drain_and_clear});
  CHECK_FALSE(cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.3}, 0, 10));
  CHECK(cache.stats(0).occupancy == 0);
  CHECK(cache.stats(0).rejected == 1);

  CHECK(cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, 1, 11));
  CHECK(cache.stats(0).occupancy == 1);

  // Equality stays closed.
  CHECK_FALSE(cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.5}, 2, 12));
}

TEST_CASE("sliding window evicts the oldest entry at capacity") {
  iccd::Rng rng(2);
  NegativeCache cache(1, CacheConfig{3, 0.1, CacheMode::sliding_window});
  for (int i = 0; i < 3; ++i)
    CHECK(cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, i, 100 + i));
  CHECK(cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, 3, 103));
  CHECK(cache.stats(0).occupancy == 3);

  const auto window = cache.drain_ready(0);
  REQUIRE(window.has_value());
  REQUIRE(window->size() == 3);
  CHECK((*window)[0].sample_id == 101);
  CHECK((*window)[2].sample_id == 103);
}

TEST_CASE("drain returns nothing below capacity") {
  iccd::Rng rng(3);
  NegativeCache cache(1, CacheConfig{4, 0.1, CacheMode::drain_and_clear});
  for (int i = 0; i < 3; ++i)
    cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, i, i);
  CHECK_FALSE(cache.drain_ready(0).has_value());
  CHECK(cache.stats(0).drains == 0);
}

TEST_CASE("drain_and_clear empties a full queue") {
  iccd::Rng rng(4);
  NegativeCache cache(2, CacheConfig{4, 0.1, CacheMode::drain_and_clear});
  for (int i = 0; i < 4; ++i)
    cache.enqueue_if_margin(1, unit_embedding(rng), Margin{0.9}, i, i);
  const auto drained = cache.drain_ready(1);
  REQUIRE(drained.has_value());
  CHECK(drained->size() == 4);
  CHECK(cache.stats(1).occupancy == 0);
  CHECK(cache.stats(1).drains == 1);
  CHECK_FALSE(cache.drain_ready(1).has_value());
}

TEST_CASE("sliding window drains repeatedly without mutation") {
  iccd::Rng rng(5);
  NegativeCache cache(1, CacheConfig{3, 0.1, CacheMode::sliding_window});
  for (int i = 0; i < 3; ++i)
    cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, i, i);
  const auto a = cache.drain_ready(0);
  const auto b = cache.drain_ready(0);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  REQUIRE(a->size() == b->size());
  for (std::size_t i = 0; i < a->size(); ++i) {
    CHECK((*a)[i].sample_id == (*b)[i].sample_id);
    CHECK((*a)[i].embedding == (*b)[i].embedding);
  }
  CHECK(cache.stats(0).occupancy == 3);
}

TEST_CASE("counter identities") {
  iccd::Rng rng(6);
  NegativeCache cache(1, CacheConfig{5, 0.1, CacheMode::drain_and_clear});
  CHECK(cache.stats(0).admitted == 0);
  CHECK(cache.stats(0).rejected == 0);
  CHECK(cache.stats(0).drains == 0);
  CHECK(cache.stats(0).occupancy == 0);

  for (int i = 0; i < 3; ++i)
    cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, i, i);
  CHECK(cache.stats(0).occupancy == 3);
  CHECK(cache.stats(0).drains == 0);

  for (int i = 3; i < 5; ++i)
    cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, i, i);
  cache.drain_ready(0);
  CHECK(cache.stats(0).occupancy == 0);
  CHECK(cache.stats(0).drains == 1);
  CHECK(cache.stats(0).admitted == 5);
  // occupancy == admitted - drains * m in drain_and_clear mode
  CHECK(cache.stats(0).occupancy == cache.stats(0).admitted - cache.stats(0).drains * 5);
}

TEST_CASE("drain_and_clear refuses admissions into a full queue") {
  iccd::Rng rng(7);
  NegativeCache cache(1, CacheConfig{2, 0.1, CacheMode::drain_and_clear});
  CHECK(cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, 0, 0));
  CHECK(cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, 1, 1));
  CHECK_FALSE(cache.enqueue_if_margin(0, unit_embedding(rng), Margin{0.9}, 2, 2));
  CHECK(cache.stats(0).occupancy == 2);
  CHECK(cache.stats(0).rejected == 1);
}

TEST_CASE("unknown class ids and non-unit embeddings are rejected") {
  iccd::Rng rng(8);
  NegativeCache cache(2, CacheConfig{2, 0.1, CacheMode::drain_and_clear});
  CHECK_THROWS_AS(cache.enqueue_if_margin(5, unit_embedding(rng), Margin{0.9}, 0, 0),
                  iccd::ContractError);
  CHECK_THROWS_AS(cache.enqueue_if_margin(0, {2.0, 0.0, 0.0, 0.0}, Margin{0.9}, 0, 0),
                  iccd::ContractError);
  CHECK_THROWS_AS(NegativeCache(0, CacheConfig{}), iccd::ContractError);
  CHECK_THROWS_AS(NegativeCache(2, CacheConfig{0, 0.1, CacheMode::drain_and_clear}),
                  iccd::ContractError);
  CHECK_THROWS_AS(NegativeCache(2, CacheConfig{2, 0.0, CacheMode::drain_and_clear}),
                  iccd::ContractError);
}

TEST_CASE("randomized scripts respect the memory bound and replay exactly") {
  const int classes = 5, capacity = 4, events = 10000;

  for (const auto mode : {CacheMode::drain_and_clear, CacheMode::sliding_window}) {
    auto run_script = [&](std::string* digest_out) {
      NegativeCache cache(classes, CacheConfig{capacity, 0.5, mode});
      iccd::Rng rng(99);
      std::ostringstream digest;
      for (int e = 0; e < events; ++e) {
        const int cls = static_cast<int>(rng.below(classes));
        if (rng.uniform01() < 0.7) {
          const double rho = rng.uniform(-1.0, 1.0);
          const bool admitted =
              cache.enqueue_if_margin(cls, unit_embedding(rng), Margin{rho}, e, e);
          digest << "e" << cls << (admitted ? "+" : "-");
        } else {
          const auto drained = cache.drain_ready(cls);
          if (drained.has_value()) {
            CHECK(drained->size() == static_cast<std::size_t>(capacity));
            digest << "d" << cls << ":";
            for (const auto& entry : *drained) digest << entry.sample_id << ",";
          } else {
            digest << "d" << cls << ":none;";
          }
        }
        CHECK(cache.total_entries() <= static_cast<std::size_t>(classes * capacity));
        for (int kk = 0; kk < classes; ++kk)
          CHECK(cache.stats(kk).occupancy <= capacity);
      }
      if (digest_out) *digest_out = digest.str();
    };

    std::string first, second;
    run_script(&first);
    run_script(&second);
    CHECK(first == second);
  }
}

}  // TEST_SUITE
