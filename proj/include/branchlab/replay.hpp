#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "branchlab/rng.hpp"

namespace branchlab {

inline constexpr double kPriorityEps = 1e-3;

// One harvested branching decision. The target is the observed subtree size
// of the node (>= 3 at branched nodes); v_root is the episode's tree size.
// Static features are shared per instance, not copied per experience.
struct Experience {
  std::string instance_id;
  std::shared_ptr<const std::vector<double>> static_features;
  std::vector<double> dynamic_features;
  int action = 0;
  int64_t target = 0;
  double predicted = 0.0;
  int64_t v_root = 0;
  double priority = 0.0;  // |target - predicted| / target + kPriorityEps
};

double experience_priority(int64_t target, double predicted);

enum class SampleMode { uniform, prioritized };

// Fixed-capacity ring buffer with strictly oldest-first eviction. Sampling
// is with replacement; prioritized draws follow normalized priorities.
// Single-writer, not thread safe.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  // Validates experience invariants (target >= 3, v_root >= target, finite
  // prediction) and recomputes priorities; throws std::invalid_argument
  // with a diagnostic on violation.
  void push(std::vector<Experience> experiences);

  size_t size() const { return size_; }
  size_t capacity() const { return capacity_; }
  uint64_t pushed_total() const { return total_; }
  bool empty() const { return size_ == 0; }

  // ids are monotone insertion counters; an id stays valid until evicted.
  const Experience& get(uint64_t id) const;
  bool contains(uint64_t id) const;
  uint64_t oldest_id() const { return total_ - size_; }

  struct Sampled {
    uint64_t id;
    const Experience* exp;
  };

  // Throws std::runtime_error on an empty buffer.
  std::vector<Sampled> sample(size_t batch_size, SampleMode mode, Rng& rng) const;

  // Recomputes priorities from stored targets and fresh predictions; ids
  // already evicted are skipped and counted in stale_skipped().
  void update_priorities(std::span<const uint64_t> ids, std::span<const double> predictions);

  uint64_t stale_skipped() const { return stale_skipped_; }

  // Debugging aid: JSON dump of the live contents in insertion order.
  void dump(const std::filesystem::path& path) const;

 private:
  size_t slot(uint64_t id) const { return static_cast<size_t>(id % capacity_); }

  std::vector<Experience> ring_;
  size_t capacity_;
  size_t size_ = 0;
  uint64_t total_ = 0;
  uint64_t stale_skipped_ = 0;
};

}  // namespace branchlab
