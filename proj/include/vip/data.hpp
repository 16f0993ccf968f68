#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vip/common.hpp"

namespace vip {

// Dense n x T matrix of variable readings, row-major per variable.
struct RawSeries {
  int n = 0;
  int t_total = 0;
  int interval_seconds = 300;
  int start_offset = 0;  // interval index of the first reading in the cycle
  std::vector<double> values;  // n * t_total, row i = variable i

  double at(int i, int t) const {
    return values[static_cast<size_t>(i) * t_total + t];
  }
  double& at(int i, int t) {
    return values[static_cast<size_t>(i) * t_total + t];
  }
  // Steps per day / days per week implied by the interval.
  int steps_per_day() const { return 86400 / interval_seconds; }
};

struct AdjacencyMatrix {
  int n = 0;
  std::vector<double> a;  // n * n, diagonal ignored (self-loops added later)

  double at(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }
  double& at(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
  int degree(int i) const {  // unweighted, off-diagonal
    int d = 0;
    for (int j = 0; j < n; ++j)
      if (j != i && at(i, j) != 0.0) ++d;
    return d;
  }
};

// Symmetrically normalized adjacency with self-loops,
// D^{-1/2} (A + I) D^{-1/2}.
struct NormalizedAdjacency {
  int n = 0;
  std::vector<double> a;
  double at(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }
  double row_sum(int i) const {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += at(i, j);
    return s;
  }
};

struct WindowSample {
  std::vector<double> x_in;   // n x l
  std::vector<double> x_out;  // n x l_out
  std::vector<int> tod_index;  // per input step, in [0, D)
  std::vector<int> dow_index;  // per input step, in [0, W)
};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

struct SynthConfig {
  int n = 40;
  int t_total = 4000;
  int k_d = 8;           // planted driver count
  double noise = 0.1;    // std of additive Gaussian noise on non-drivers
  int period = 96;       // seasonal period, in steps
  int interval_seconds = 900;
};

// Value CSV: header "n,T_total,interval_seconds,start_offset", then one CSV
// row of T_total readings per variable. Adjacency: "i,j,weight" edge list.
std::pair<RawSeries, AdjacencyMatrix> load_dataset(
    const std::string& values_path, const std::string& adjacency_path);
void save_values(const RawSeries& s, const std::string& path);
void save_adjacency(const AdjacencyMatrix& a, const std::string& path);

NormStats zscore_fit(const RawSeries& train);
void zscore_apply(std::vector<double>& x, const NormStats& stats);
void zscore_invert(std::vector<double>& x, const NormStats& stats);

// Contiguous chronological split; ratios must sum to 1 within 1e-9.
struct SplitSeries {
  RawSeries train, val, test;
};
SplitSeries split(const RawSeries& series, double r_train, double r_val,
                  double r_test, int min_len);

std::vector<WindowSample> make_windows(const RawSeries& series, int l,
                                       int l_out, int stride);

NormalizedAdjacency normalize_adjacency(const AdjacencyMatrix& a);

struct SynthDataset {
  RawSeries series;
  AdjacencyMatrix adjacency;
  std::vector<int> drivers;
};
SynthDataset synth_generate(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace vip
