#include "branchlab/replay.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace branchlab {

double experience_priority(int64_t target, double predicted) {
  return std::abs(static_cast<double>(target) - predicted) / static_cast<double>(target) +
         kPriorityEps;
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  ring_.resize(capacity);
}

void ReplayBuffer::push(std::vector<Experience> experiences) {
  for (Experience& exp : experiences) {
    if (exp.target < 3)
      throw std::invalid_argument("replay: target " + std::to_string(exp.target) +
                                  " below the branched-node minimum of 3");
    if (exp.v_root < exp.target)
      throw std::invalid_argument("replay: v_root " + std::to_string(exp.v_root) +
                                  " smaller than target " + std::to_string(exp.target));
    if (!std::isfinite(exp.predicted))
      throw std::invalid_argument("replay: non-finite prediction");
    exp.priority = experience_priority(exp.target, exp.predicted);
    ring_[slot(total_)] = std::move(exp);
    ++total_;
    if (size_ < capacity_) ++size_;
  }
}

const Experience& ReplayBuffer::get(uint64_t id) const {
  if (!contains(id)) throw std::out_of_range("replay: id " + std::to_string(id) + " not in buffer");
  return ring_[slot(id)];
}

bool ReplayBuffer::contains(uint64_t id) const { return id >= oldest_id() && id < total_; }

std::vector<ReplayBuffer::Sampled> ReplayBuffer::sample(size_t batch_size, SampleMode mode,
                                                        Rng& rng) const {
  if (size_ == 0) throw std::runtime_error("replay: cannot sample from an empty buffer");
  std::vector<Sampled> out;
  out.reserve(batch_size);
  const uint64_t first = oldest_id();
  if (mode == SampleMode::uniform) {
    for (size_t i = 0; i < batch_size; ++i) {
      uint64_t id = first + rng.next_u64() % size_;
      out.push_back({id, &ring_[slot(id)]});
    }
    return out;
  }
  double total_priority = 0.0;
  for (size_t i = 0; i < size_; ++i) total_priority += ring_[slot(first + i)].priority;
  for (size_t i = 0; i < batch_size; ++i) {
    double r = rng.next_double() * total_priority;
    double acc = 0.0;
    uint64_t id = first + size_ - 1;  // roundoff fallback: last element
    for (size_t k = 0; k < size_; ++k) {
      acc += ring_[slot(first + k)].priority;
      if (r < acc) {
        id = first + k;
        break;
      }
    }
    out.push_back({id, &ring_[slot(id)]});
  }
  return out;
}

void ReplayBuffer::dump(const std::filesystem::path& path) const {
  nlohmann::json items = nlohmann::json::array();
  for (uint64_t id = oldest_id(); id < total_; ++id) {
    const Experience& exp = ring_[slot(id)];
    items.push_back({{"id", id},
                     {"instance", exp.instance_id},
                     {"action", exp.action},
                     {"target", exp.target},
                     {"predicted", exp.predicted},
                     {"v_root", exp.v_root},
                     {"priority", exp.priority}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << nlohmann::json{{"size", size_}, {"pushed_total", total_}, {"experiences", items}}.dump(1)
      << "\n";
}

void ReplayBuffer::update_priorities(std::span<const uint64_t> ids,
                                     std::span<const double> predictions) {
  if (ids.size() != predictions.size())
    throw std::invalid_argument("replay: ids/predictions length mismatch");
  for (size_t i = 0; i < ids.size(); ++i) {
    if (!contains(ids[i])) {
      ++stale_skipped_;
      continue;
    }
    Experience& exp = ring_[slot(ids[i])];
    exp.predicted = predictions[i];
    exp.priority = experience_priority(exp.target, exp.predicted);
  }
}

}  // namespace branchlab
