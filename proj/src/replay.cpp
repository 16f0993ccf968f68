#include "vip/replay.hpp"

#include <cmath>

namespace vip {

ReplayPolicy replay_policy_from_string(const std::string& s) {
  if (s == "pvr") return ReplayPolicy::PVR;
  if (s == "rand-er") return ReplayPolicy::RAND_ER;
  if (s == "in-pvr") return ReplayPolicy::IN_PVR;
  throw ConfigError("unknown replay policy '" + s + "'");
}

std::string to_string(ReplayPolicy p) {
  switch (p) {
    case ReplayPolicy::PVR: return "pvr";
    case ReplayPolicy::RAND_ER: return "rand-er";
    case ReplayPolicy::IN_PVR: return "in-pvr";
  }
  return "?";
}

double replay_priority(double loss, ReplayPolicy policy) {
  if (!std::isfinite(loss)) throw NumericError("replay_priority: loss not finite");
  constexpr double kEps = 1e-8;  // reciprocal of zero loss is capped
  switch (policy) {
    case ReplayPolicy::PVR: return 1.0 / std::max(loss, kEps);
    case ReplayPolicy::IN_PVR: return std::max(loss, kEps);
    case ReplayPolicy::RAND_ER: return 1.0;
  }
  return 1.0;
}

std::optional<ReplaySample> ReplayBuffer::push(ReplaySample sample) {
  std::optional<ReplaySample> evicted;
  if (samples_.size() >= capacity_) {
    const size_t victim = last_replayed_.value_or(0);
    evicted = std::move(samples_[victim]);
    samples_.erase(samples_.begin() + static_cast<std::ptrdiff_t>(victim));
    last_replayed_.reset();
  }
  samples_.push_back(std::move(sample));
  return evicted;
}

std::optional<ReplaySample> ReplayBuffer::sample_for_replay(
    std::mt19937_64& rng) {
  if (samples_.empty()) return std::nullopt;
  std::vector<double> weights(samples_.size());
  double total = 0.0;
  for (size_t i = 0; i < samples_.size(); ++i) {
    weights[i] = std::pow(samples_[i].priority, alpha_);
    total += weights[i];
  }
  std::uniform_real_distribution<double> unif(0.0, total);
  double u = unif(rng);
  size_t pick = samples_.size() - 1;
  for (size_t i = 0; i < samples_.size(); ++i) {
    if (u < weights[i]) {
      pick = i;
      break;
    }
    u -= weights[i];
  }
  last_replayed_ = pick;
  return samples_[pick];
}

}  // namespace vip
