#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "vip/pruning.hpp"

using namespace vip;

namespace {

int popcount(const std::vector<std::uint8_t>& m) {
  int c = 0;
  for (auto x : m) c += x;
  return c;
}

}  // namespace

TEST_CASE("b_hat initialization from the normalized graph") {
  AdjacencyMatrix pair;
  pair.n = 2;
  pair.a = {0, 1, 1, 0};
  auto b1 = init_b_hat(normalize_adjacency(pair));
  CHECK(b1->v[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(b1->v[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(b1->requires_grad);

  AdjacencyMatrix none;
  none.n = 4;
  none.a.assign(16, 0.0);
  auto b2 = init_b_hat(normalize_adjacency(none));
  for (double v : b2->v) CHECK(v == doctest::Approx(1.0));

  AdjacencyMatrix star;  // node 0 is the hub of K_{1,3}
  star.n = 4;
  star.a.assign(16, 0.0);
  for (int leaf = 1; leaf < 4; ++leaf)
    star.a[static_cast<size_t>(leaf)] = star.a[static_cast<size_t>(leaf) * 4] = 1.0;
  auto b3 = init_b_hat(normalize_adjacency(star));
  for (int leaf = 1; leaf < 4; ++leaf) CHECK(b3->v[0] > b3->v[leaf]);
}

TEST_CASE("p_hat initialization statistics") {
  const int q = 100000;
  auto p = init_p_hat(q, 77);
  double mean = 0.0;
  for (double v : p->v) mean += v;
  mean /= q;
  double var = 0.0;
  for (double v : p->v) var += (v - mean) * (v - mean);
  const double stddev = std::sqrt(var / q);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(stddev - 1.0) < 0.02);

  auto p2 = init_p_hat(q, 77);
  CHECK(p->v == p2->v);
  auto p3 = init_p_hat(q, 78);
  CHECK(p->v != p3->v);
}

TEST_CASE("retention schedule") {
  CHECK(retained_count(10, 0.1, 1) == 9);
  CHECK(retained_count(170, 0.1, 22) == 16);
  CHECK(retained_count(5, 0.5, 10) == 1);
  CHECK(retained_count(40, 0.1, 20) == 4);
  CHECK(retained_count(40, 0.1, 22) == 3);

  CHECK(iterations_to_target(170, 0.1, 17) == 22);
  CHECK(iterations_to_target(10, 0.5, 5) == 1);
  CHECK(iterations_to_target(100, 0.1, 100) == 0);
  CHECK(iterations_to_target(40, 0.1, 4) == 20);  // 40*0.9^20 = 4.86 -> 4
}

TEST_CASE("mask computation") {
  std::vector<double> imp = {5, 4, 3, 2, 1};
  std::vector<std::uint8_t> all(5, 1);
  auto m = compute_mask(imp, all, 0.2);
  CHECK(m == std::vector<std::uint8_t>{1, 1, 1, 1, 0});

  std::vector<double> equal(5, 3.0);
  auto tie = compute_mask(equal, all, 0.2);
  CHECK(tie == std::vector<std::uint8_t>{0, 1, 1, 1, 1});

  auto pinned = compute_mask(imp, all, 0.2, {4});
  CHECK(pinned == std::vector<std::uint8_t>{1, 1, 1, 0, 1});

  // |importance| matters, not sign.
  std::vector<double> neg = {-5, 4, -3, 2, -1};
  CHECK(compute_mask(neg, all, 0.2) == std::vector<std::uint8_t>{1, 1, 1, 1, 0});

  // Monotone: masked-out entries stay out.
  std::vector<std::uint8_t> prev = {1, 0, 1, 0, 1};
  auto next = compute_mask_count(imp, prev, 2);
  CHECK(next == std::vector<std::uint8_t>{1, 0, 1, 0, 0});

  CHECK_THROWS_AS(compute_mask_count(imp, all, 1, {0, 1}), ConfigError);
}

TEST_CASE("rank selection equals quantile thresholding on distinct values") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> unif(-10, 10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> imp(20);
    for (double& v : imp) v = unif(rng);
    std::vector<std::uint8_t> prev(20, 1);
    const int keep = 1 + static_cast<int>(rng() % 19);
    auto got = compute_mask_count(imp, prev, keep);
    // Brute force: threshold at the keep-th largest |importance|.
    std::vector<double> mags(20);
    for (int i = 0; i < 20; ++i) mags[static_cast<size_t>(i)] = std::abs(imp[i]);
    std::vector<double> sorted = mags;
    std::sort(sorted.rbegin(), sorted.rend());
    const double threshold = sorted[static_cast<size_t>(keep - 1)];
    for (int i = 0; i < 20; ++i)
      CHECK(got[static_cast<size_t>(i)] ==
            (mags[static_cast<size_t>(i)] >= threshold ? 1 : 0));
    CHECK(popcount(got) == keep);

    // Positive scaling never changes the mask.
    std::vector<double> scaled = imp;
    for (double& v : scaled) v *= 37.5;
    CHECK(compute_mask_count(scaled, prev, keep) == got);
  }
}

TEST_CASE("schedule invariants across iterations") {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> unif(-1, 1);
  const int n = 30;
  std::vector<double> imp(n);
  for (double& v : imp) v = unif(rng);
  std::vector<std::uint8_t> mask(n, 1);
  for (int k = 1; k <= 12; ++k) {
    auto next = compute_mask_count(imp, mask, retained_count(n, 0.2, k));
    CHECK(popcount(next) == retained_count(n, 0.2, k));
    for (int i = 0; i < n; ++i)
      CHECK(next[static_cast<size_t>(i)] <= mask[static_cast<size_t>(i)]);
    mask = next;
  }
  CHECK(popcount(mask) >= 1);
}

TEST_CASE("random regularizer masks") {
  std::mt19937_64 rng(17);
  CHECK(popcount(random_reg_mask(6, 0, rng)) == 0);
  CHECK(popcount(random_reg_mask(6, 6, rng)) == 6);

  const int n = 10, count = 3, draws = 10000;
  std::vector<int> hits(n, 0);
  for (int t = 0; t < draws; ++t) {
    auto m = random_reg_mask(n, count, rng);
    CHECK(popcount(m) == count);
    for (int i = 0; i < n; ++i) hits[static_cast<size_t>(i)] += m[static_cast<size_t>(i)];
  }
  for (int i = 0; i < n; ++i) {
    const double freq = static_cast<double>(hits[static_cast<size_t>(i)]) / draws;
    CHECK(std::abs(freq - 0.3) < 0.02);
  }
}
