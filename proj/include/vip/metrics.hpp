#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vip/common.hpp"

namespace vip {

struct MetricRow {
  double mae = 0.0;
  double rmse = 0.0;
  double mape_pct = 0.0;   // percent; NaN when every entry was excluded
  int mape_excluded = 0;   // |truth| < eps entries dropped from MAPE
};

struct HorizonMetrics {
  std::vector<MetricRow> per_step;  // j = 1..l'
  MetricRow average;
};

double mae(const std::vector<double>& pred, const std::vector<double>& truth);
double rmse(const std::vector<double>& pred, const std::vector<double>& truth);
// Excludes entries with |truth| < eps; *excluded reports the count. Throws
// NumericError when nothing remains.
double mape(const std::vector<double>& pred, const std::vector<double>& truth,
            double eps, int* excluded);

// pred/truth are flattened window-major collections of n x l' forecasts in
// original units.
HorizonMetrics horizon_metrics(const std::vector<std::vector<double>>& pred,
                               const std::vector<std::vector<double>>& truth,
                               int n, int l_out, double mape_eps = 1.0);

// Selection-diversity: per-batch variable masks grouped by iteration.
// 1 - (2 / (K B (B-1))) * sum_k sum_{t<t'} |b_t ^ b_t'| / |b_t v b_t'|.
// Iterations with fewer than 2 batches are rejected.
double jaccard_distance(
    const std::vector<std::vector<std::vector<std::uint8_t>>>& mask_log);

void write_metrics_csv(const HorizonMetrics& m, const std::string& path);

}  // namespace vip
