#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iccd {

// Labeled feature vector; view_id names the sub-cluster of the class the
// sample was drawn from.
struct Sample {
  std::vector<double> x;
  int y = 0;
  int view_id = 0;
};

struct GenParams {
  int classes = 4;
  int views_per_class = 3;
  int per_view = 50;
  int d_in = 16;
  double class_sep = 6.0;
  double view_sep = 2.0;
  double noise = 0.4;
  std::uint64_t seed = 1;
};

struct Dataset {
  std::vector<Sample> samples;
  int c = 0;
  int views_per_class = 0;
  int d_in = 0;
  std::uint64_t seed = 0;
  GenParams params;  // generator inputs, kept for held-out regeneration
  // Ground-truth view centers (class-major, then view), for diagnostics.
  std::vector<std::vector<double>> view_centers;

  std::size_t size() const { return samples.size(); }

  // Indices of all samples sharing class y.
  std::vector<int> class_indices(int y) const;
};

// Gaussian blobs with a two-level structure: class centers pairwise at least
// class_sep apart, and per class views_per_class sub-centers pairwise at
// least view_sep apart (a single view sits exactly on the class center).
// Fully determined by the seed. Throws ContractError when the separation
// structure does not fit in d_in dimensions or a count/ordering precondition
// fails.
Dataset generate_multiview(const GenParams& params);

// x + strength * g with g a seeded standard normal vector. strength 0 returns
// x unchanged.
std::vector<double> augment(const std::vector<double>& x, double strength, std::uint64_t seed);

// One seeded permutation of [0, size) split into consecutive batches; the
// last batch may be short.
std::vector<std::vector<int>> batch_iter(const Dataset& ds, int batch_size,
                                         std::uint64_t epoch_seed);

// CSV with header y,view_id,x0..x{d-1}; floats carry 17 significant digits so
// the round-trip is exact.
void save_csv(const Dataset& ds, const std::string& path);
Dataset load_csv(const std::string& path);

}  // namespace iccd
