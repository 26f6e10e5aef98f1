#include "iccd/negcache.hpp"

#include <cmath>
#include <string>

#include "iccd/errors.hpp"

namespace iccd {

NegativeCache::NegativeCache(int num_classes, CacheConfig cfg) : cfg_(cfg) {
  if (num_classes < 1) throw ContractError("NegativeCache needs at least one class");
  if (cfg.capacity_m < 1) throw ContractError("NegativeCache capacity_m must be >= 1");
  if (!(cfg.delta > 0.0)) throw ContractError("NegativeCache delta must be > 0");
  queues_.resize(static_cast<std::size_t>(num_classes));
}

NegativeCache::Queue& NegativeCache::queue_at(int class_id) {
  if (class_id < 0 || class_id >= num_classes())
    throw ContractError("NegativeCache: unknown class id " + std::to_string(class_id));
  return queues_[static_cast<std::size_t>(class_id)];
}

const NegativeCache::Queue& NegativeCache::queue_at(int class_id) const {
  if (class_id < 0 || class_id >= num_classes())
    throw ContractError("NegativeCache: unknown class id " + std::to_string(class_id));
  return queues_[static_cast<std::size_t>(class_id)];
}

bool NegativeCache::enqueue_if_margin(int class_id, std::vector<double> embedding, Margin rho,
                                      long step, int sample_id) {
  Queue& q = queue_at(class_id);

  double norm2 = 0.0;
  for (double v : embedding) norm2 += v * v;
  if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6)
    throw ContractError("enqueue_if_margin: embedding is not unit-norm");

  if (!(rho.rho > cfg_.delta)) {
    ++q.stats.rejected;
    return false;
  }

  const auto capacity = static_cast<std::size_t>(cfg_.capacity_m);
  if (q.entries.size() >= capacity) {
    if (cfg_.mode == CacheMode::sliding_window) {
      q.entries.pop_front();
    } else {
      ++q.stats.rejected;  // full pipeline backpressure; consume it first
      return false;
    }
  }
  q.entries.push_back(CacheEntry{std::move(embedding), sample_id, step});
  ++q.stats.admitted;
  q.stats.occupancy = static_cast<int>(q.entries.size());
  return true;
}

std::optional<std::vector<CacheEntry>> NegativeCache::drain_ready(int class_id) {
  Queue& q = queue_at(class_id);
  if (q.entries.size() < static_cast<std::size_t>(cfg_.capacity_m)) return std::nullopt;

  std::vector<CacheEntry> out(q.entries.begin(), q.entries.end());
  ++q.stats.drains;
  if (cfg_.mode == CacheMode::drain_and_clear) {
    q.entries.clear();
    q.stats.occupancy = 0;
  }
  return out;
}

ClassQueueStats NegativeCache::stats(int class_id) const { return queue_at(class_id).stats; }

std::vector<ClassQueueStats> NegativeCache::all_stats() const {
  std::vector<ClassQueueStats> out;
  out.reserve(queues_.size());
  for (const auto& q : queues_) out.push_back(q.stats);
  return out;
}

std::size_t NegativeCache::total_entries() const {
  std::size_t n = 0;
  for (const auto& q : queues_) n += q.entries.size();
  return n;
}

}  // namespace iccd
