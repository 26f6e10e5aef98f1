#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "iccd/losses.hpp"

namespace iccd {

// Refresh policy for a full class queue. drain_and_clear empties the queue
// when it is consumed; sliding_window keeps it and evicts the oldest entry
// on each admission past capacity.
enum class CacheMode { drain_and_clear, sliding_window };

struct CacheConfig {
  int capacity_m = 8;
  double delta = 0.1;
  CacheMode mode = CacheMode::drain_and_clear;
};

struct CacheEntry {
  std::vector<double> embedding;
  int sample_id = -1;
  long step_enqueued = 0;
};

struct ClassQueueStats {
  int occupancy = 0;
  long admitted = 0;
  long rejected = 0;
  long drains = 0;
};

// Per-class FIFO of margin-admitted embeddings. Entries are detached value
// snapshots; total storage never exceeds classes * capacity_m.
class NegativeCache {
public:
  NegativeCache(int num_classes, CacheConfig cfg);

  // Admits iff rho > delta (strict). In sliding_window mode an admission
  // past capacity evicts the oldest entry first. In drain_and_clear mode an
  // admission into a full queue is refused (counted as rejected): the queue
  // must be consumed before it accepts more.
  bool enqueue_if_margin(int class_id, std::vector<double> embedding, Margin rho, long step,
                         int sample_id);

  // drain_and_clear: all capacity_m entries iff the queue is full, emptying
  // it. sliding_window: a copy of the full window, without clearing.
  std::optional<std::vector<CacheEntry>> drain_ready(int class_id);

  ClassQueueStats stats(int class_id) const;
  std::vector<ClassQueueStats> all_stats() const;

  int num_classes() const { return static_cast<int>(queues_.size()); }
  const CacheConfig& config() const { return cfg_; }
  std::size_t total_entries() const;

private:
  struct Queue {
    std::deque<CacheEntry> entries;
    ClassQueueStats stats;
  };

  Queue& queue_at(int class_id);
  const Queue& queue_at(int class_id) const;

  CacheConfig cfg_;
  std::vector<Queue> queues_;
};

}  // namespace iccd
