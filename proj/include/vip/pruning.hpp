#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "vip/data.hpp"
#include "vip/tensor.hpp"

namespace vip {

// Binary masks plus the learnable importance vectors they are derived from.
// b/p are non-differentiable selections; gradients reach b_hat through the
// adjacency fusion term and its L1 regularizer, and p_hat through the gated
// value projection and its L1 regularizer.
struct MaskState {
  std::vector<std::uint8_t> b;  // length n
  std::vector<std::uint8_t> p;  // length q
  TensorPtr b_hat;              // length n, trainable
  TensorPtr p_hat;              // length q, trainable
  std::set<int> pinned;         // variable indices forced to stay selected

  int selected_count() const {
    int c = 0;
    for (auto x : b) c += x;
    return c;
  }
  int param_count() const {
    int c = 0;
    for (auto x : p) c += x;
    return c;
  }
  std::vector<int> selected_indices() const {
    std::vector<int> idx;
    for (size_t i = 0; i < b.size(); ++i)
      if (b[i]) idx.push_back(static_cast<int>(i));
    return idx;
  }
  std::vector<int> param_indices() const {
    std::vector<int> idx;
    for (size_t i = 0; i < p.size(); ++i)
      if (p[i]) idx.push_back(static_cast<int>(i));
    return idx;
  }
};

// b_hat_i = row sum of the normalized adjacency at row i.
TensorPtr init_b_hat(const NormalizedAdjacency& a_norm);

// q i.i.d. standard normal draws.
TensorPtr init_p_hat(int q, std::uint64_t seed);

// max(floor(size * (1-rate)^k), 1).
int retained_count(int size, double rate, int k);

// Smallest k with retained_count(n, rate, k) <= m.
int iterations_to_target(int n, double rate, int m);

// Rank-based quantile pruning: keeps exactly `keep_count` entries of
// prev_mask (pinned always retained, remainder by largest |importance|).
// Ties prune the lowest index first.
std::vector<std::uint8_t> compute_mask_count(
    const std::vector<double>& importance,
    const std::vector<std::uint8_t>& prev_mask, int keep_count,
    const std::set<int>& pinned = {});

// One pruning step at rate `rate` applied to the current survivor count.
std::vector<std::uint8_t> compute_mask(
    const std::vector<double>& importance,
    const std::vector<std::uint8_t>& prev_mask, double rate,
    const std::set<int>& pinned = {});

// Exactly `count` ones at uniformly random positions.
std::vector<std::uint8_t> random_reg_mask(int size, int count,
                                          std::mt19937_64& rng);

}  // namespace vip
