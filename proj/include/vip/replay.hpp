#pragma once

#include <optional>
#include <random>
#include <vector>

#include "vip/common.hpp"
#include "vip/data.hpp"

namespace vip {

enum class ReplayPolicy { PVR, RAND_ER, IN_PVR };

ReplayPolicy replay_policy_from_string(const std::string& s);
std::string to_string(ReplayPolicy p);

// Priority of a freshly trained sample: PVR rewards low loss (reciprocal),
// IN-PVR flips it, RAND-ER ignores loss.
double replay_priority(double loss, ReplayPolicy policy);

struct ReplaySample {
  WindowSample window;
  std::vector<double> b_hat_snapshot;  // deep copies taken at storage time
  std::vector<double> p_hat_snapshot;
  double priority = 1.0;
};

// Capacity-bounded priority-sampled buffer. Single-owner (the training loop);
// eviction removes the most recently replayed sample once full.
class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, ReplayPolicy policy, double alpha)
      : capacity_(capacity), policy_(policy), alpha_(alpha) {
    if (capacity < 1) throw ConfigError("ReplayBuffer: capacity must be >= 1");
    if (alpha < 0.0) throw ConfigError("ReplayBuffer: alpha must be >= 0");
  }

  size_t size() const { return samples_.size(); }
  size_t capacity() const { return capacity_; }
  bool empty() const { return samples_.empty(); }
  ReplayPolicy policy() const { return policy_; }
  const ReplaySample& at(size_t i) const { return samples_[i]; }

  // Inserts; if at capacity, evicts the last replayed sample (falling back to
  // the oldest when nothing has been replayed). Returns the evicted sample.
  std::optional<ReplaySample> push(ReplaySample sample);

  // Draws with probability P^alpha / sum P^alpha; nullopt when empty.
  std::optional<ReplaySample> sample_for_replay(std::mt19937_64& rng);

 private:
  size_t capacity_;
  ReplayPolicy policy_;
  double alpha_;
  std::vector<ReplaySample> samples_;
  std::optional<size_t> last_replayed_;
};

}  // namespace vip
