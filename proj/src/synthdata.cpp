#include "iccd/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "iccd/errors.hpp"
#include "iccd/rng.hpp"

namespace iccd {

namespace {

constexpr std::uint64_t kCenterStream = 0x63656e74;  // "cent"
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;   // "nois"

// views_per_class orthonormal directions, deterministic under rng.
std::vector<std::vector<double>> orthonormal_directions(int count, int dim, Rng& rng) {
  std::vector<std::vector<double>> basis;
  basis.reserve(count);
  while (static_cast<int>(basis.size()) < count) {
    auto v = rng.normal_vector(static_cast<std::size_t>(dim));
    for (const auto& u : basis) {
      double proj = 0.0;
      for (int j = 0; j < dim; ++j) proj += v[j] * u[j];
      for (int j = 0; j < dim; ++j) v[j] -= proj * u[j];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;  // redraw, deterministically
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

std::vector<int> Dataset::class_indices(int y) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].y == y) out.push_back(static_cast<int>(i));
  return out;
}

Dataset generate_multiview(const GenParams& p) {
  if (p.classes < 1 || p.views_per_class < 1 || p.per_view < 1 || p.d_in < 1)
    throw ContractError("generate_multiview: all counts must be >= 1");
  if (!(p.class_sep > p.view_sep && p.view_sep > p.noise && p.noise > 0.0))
    throw ContractError("generate_multiview requires class_sep > view_sep > noise > 0");
  if (p.classes > p.d_in)
    throw ContractError("generate_multiview: cannot separate " + std::to_string(p.classes) +
                        " class centers by " + std::to_string(p.class_sep) + " in " +
                        std::to_string(p.d_in) + " dimensions");
  if (p.views_per_class > p.d_in)
    throw ContractError("generate_multiview: cannot separate " + std::to_string(p.views_per_class) +
                        " view centers in " + std::to_string(p.d_in) + " dimensions");

  // Class centers on scaled coordinate axes: pairwise distance is exactly
  // class_sep. View sub-centers use per-class seeded orthonormal offsets at
  // pairwise distance exactly view_sep; a lone view sits on the class center.
  const double class_scale = p.class_sep / std::numbers::sqrt2;
  const double view_scale = p.view_sep / std::numbers::sqrt2;

  Dataset ds;
  ds.c = p.classes;
  ds.views_per_class = p.views_per_class;
  ds.d_in = p.d_in;
  ds.seed = p.seed;
  ds.params = p;
  ds.samples.reserve(static_cast<std::size_t>(p.classes) * p.views_per_class * p.per_view);

  for (int k = 0; k < p.classes; ++k) {
    Rng center_rng(seed_mix(p.seed, kCenterStream, static_cast<std::uint64_t>(k)));
    std::vector<std::vector<double>> offsets;
    if (p.views_per_class > 1)
      offsets = orthonormal_directions(p.views_per_class, p.d_in, center_rng);

    for (int v = 0; v < p.views_per_class; ++v) {
      std::vector<double> center(static_cast<std::size_t>(p.d_in), 0.0);
      center[static_cast<std::size_t>(k)] = class_scale;
      if (p.views_per_class > 1)
        for (int j = 0; j < p.d_in; ++j) center[j] += view_scale * offsets[v][j];
      ds.view_centers.push_back(center);

      Rng noise_rng(seed_mix(p.seed, kNoiseStream,
                             static_cast<std::uint64_t>(k) * 1000003ULL + v));
      for (int s = 0; s < p.per_view; ++s) {
        Sample sample;
        sample.y = k;
        sample.view_id = v;
        sample.x.resize(static_cast<std::size_t>(p.d_in));
        for (int j = 0; j < p.d_in; ++j) sample.x[j] = center[j] + p.noise * noise_rng.normal();
        ds.samples.push_back(std::move(sample));
      }
    }
  }
  return ds;
}

std::vector<double> augment(const std::vector<double>& x, double strength, std::uint64_t seed) {
  if (strength < 0.0) throw ContractError("augment strength must be >= 0");
  if (strength == 0.0) return x;
  Rng rng(seed);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + strength * rng.normal();
  return out;
}

std::vector<std::vector<int>> batch_iter(const Dataset& ds, int batch_size,
                                         std::uint64_t epoch_seed) {
  if (batch_size < 1) throw ContractError("batch_iter batch_size must be >= 1");
  std::vector<int> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(epoch_seed);
  rng.shuffle(order);

  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  const int d = ds.d_in;
  out << "y,view_id";
  for (int j = 0; j < d; ++j) out << ",x" << j;
  out << "\n";
  char buf[64];
  for (const auto& s : ds.samples) {
    out << s.y << "," << s.view_id;
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", s.x[static_cast<std::size_t>(j)]);
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + path);

  Dataset ds;
  int max_y = -1, max_view = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    Sample s;
    if (!std::getline(row, cell, ',')) throw IoError("malformed row in " + path);
    s.y = std::stoi(cell);
    if (!std::getline(row, cell, ',')) throw IoError("malformed row in " + path);
    s.view_id = std::stoi(cell);
    while (std::getline(row, cell, ',')) s.x.push_back(std::stod(cell));
    max_y = std::max(max_y, s.y);
    max_view = std::max(max_view, s.view_id);
    if (!ds.samples.empty() && ds.samples.front().x.size() != s.x.size())
      throw IoError("inconsistent feature width in " + path);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw IoError("no samples in " + path);
  ds.c = max_y + 1;
  ds.views_per_class = max_view + 1;
  ds.d_in = static_cast<int>(ds.samples.front().x.size());
  return ds;
}

}  // namespace iccd
