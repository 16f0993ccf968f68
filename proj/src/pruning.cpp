#include "vip/pruning.hpp"

#include <algorithm>
#include <cmath>

namespace vip {

TensorPtr init_b_hat(const NormalizedAdjacency& a_norm) {
  std::vector<double> v(static_cast<size_t>(a_norm.n));
  for (int i = 0; i < a_norm.n; ++i) v[static_cast<size_t>(i)] = a_norm.row_sum(i);
  return Tensor::from({a_norm.n}, std::move(v), true);
}

TensorPtr init_p_hat(int q, std::uint64_t seed) {
  if (q < 1) throw ConfigError("init_p_hat: q must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(static_cast<size_t>(q));
  for (double& x : v) x = gauss(rng);
  return Tensor::from({q}, std::move(v), true);
}

int retained_count(int size, double rate, int k) {
  if (k < 0) throw ContractError("retained_count: k must be >= 0");
  const double kept = size * std::pow(1.0 - rate, k);
  return std::max(static_cast<int>(std::floor(kept)), 1);
}

int iterations_to_target(int n, double rate, int m) {
  if (m < 1 || m > n) throw ConfigError("iterations_to_target: need 1 <= m <= n");
  int k = 0;
  while (retained_count(n, rate, k) > m) ++k;
  return k;
}

std::vector<std::uint8_t> compute_mask_count(
    const std::vector<double>& importance,
    const std::vector<std::uint8_t>& prev_mask, int keep_count,
    const std::set<int>& pinned) {
  const int n = static_cast<int>(importance.size());
  if (static_cast<int>(prev_mask.size()) != n)
    throw ContractError("compute_mask: importance/prev_mask size mismatch");
  keep_count = std::max(keep_count, 1);
  for (int i : pinned)
    if (i < 0 || i >= n || !prev_mask[static_cast<size_t>(i)])
      throw ContractError("compute_mask: pinned index not in previous mask");
  if (static_cast<int>(pinned.size()) > keep_count)
    throw ConfigError("compute_mask: pinned count exceeds retention budget");

  std::vector<int> live;
  for (int i = 0; i < n; ++i)
    if (prev_mask[static_cast<size_t>(i)] && !pinned.count(i)) live.push_back(i);

  // Largest |importance| first; among ties the lowest index is pruned first,
  // so the higher index wins.
  std::sort(live.begin(), live.end(), [&](int a, int b) {
    const double ia = std::abs(importance[static_cast<size_t>(a)]);
    const double ib = std::abs(importance[static_cast<size_t>(b)]);
    if (ia != ib) return ia > ib;
    return a > b;
  });

  std::vector<std::uint8_t> out(static_cast<size_t>(n), 0);
  for (int i : pinned) out[static_cast<size_t>(i)] = 1;
  int remaining = keep_count - static_cast<int>(pinned.size());
  for (int i : live) {
    if (remaining <= 0) break;
    out[static_cast<size_t>(i)] = 1;
    --remaining;
  }
  return out;
}

std::vector<std::uint8_t> compute_mask(
    const std::vector<double>& importance,
    const std::vector<std::uint8_t>& prev_mask, double rate,
    const std::set<int>& pinned) {
  int live = 0;
  for (auto x : prev_mask) live += x;
  if (live < 1) throw ContractError("compute_mask: empty previous mask");
  const int keep = std::max(static_cast<int>(std::floor(live * (1.0 - rate))), 1);
  return compute_mask_count(importance, prev_mask, keep, pinned);
}

std::vector<std::uint8_t> random_reg_mask(int size, int count,
                                          std::mt19937_64& rng) {
  if (count < 0 || count > size)
    throw ConfigError("random_reg_mask: need 0 <= count <= size");
  std::vector<int> idx(static_cast<size_t>(size));
  for (int i = 0; i < size; ++i) idx[static_cast<size_t>(i)] = i;
  // Partial Fisher-Yates: the first `count` entries are a uniform subset.
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, size - 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(pick(rng))]);
  }
  std::vector<std::uint8_t> out(static_cast<size_t>(size), 0);
  for (int i = 0; i < count; ++i) out[static_cast<size_t>(idx[static_cast<size_t>(i)])] = 1;
  return out;
}

}  // namespace vip
