#include "vip/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace vip {

namespace {
void check_same_size(const std::vector<double>& a,
                     const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw ContractError("metrics: size mismatch or empty input");
}
}  // namespace

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
  check_same_size(pred, truth);
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
  check_same_size(pred, truth);
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double mape(const std::vector<double>& pred, const std::vector<double>& truth,
            double eps, int* excluded) {
  check_same_size(pred, truth);
  double s = 0.0;
  int kept = 0, skipped = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (std::abs(truth[i]) < eps) {
      ++skipped;
      continue;
    }
    s += std::abs((truth[i] - pred[i]) / truth[i]);
    ++kept;
  }
  if (excluded) *excluded = skipped;
  if (kept == 0)
    throw NumericError("mape: every ground-truth entry was below the threshold");
  return s / kept * 100.0;
}

HorizonMetrics horizon_metrics(const std::vector<std::vector<double>>& pred,
                               const std::vector<std::vector<double>>& truth,
                               int n, int l_out, double mape_eps) {
  if (pred.size() != truth.size() || pred.empty())
    throw ContractError("horizon_metrics: window count mismatch or empty");
  HorizonMetrics out;
  out.per_step.resize(static_cast<size_t>(l_out));
  std::vector<double> all_pred, all_truth;
  for (int j = 0; j < l_out; ++j) {
    std::vector<double> pj, tj;
    for (size_t w = 0; w < pred.size(); ++w) {
      if (static_cast<int>(pred[w].size()) != n * l_out)
        throw ContractError("horizon_metrics: window size mismatch");
      for (int i = 0; i < n; ++i) {
        pj.push_back(pred[w][static_cast<size_t>(i) * l_out + j]);
        tj.push_back(truth[w][static_cast<size_t>(i) * l_out + j]);
      }
    }
    MetricRow row;
    row.mae = mae(pj, tj);
    row.rmse = rmse(pj, tj);
    try {
      row.mape_pct = mape(pj, tj, mape_eps, &row.mape_excluded);
    } catch (const NumericError&) {
      row.mape_pct = std::numeric_limits<double>::quiet_NaN();
    }
    out.per_step[static_cast<size_t>(j)] = row;
    all_pred.insert(all_pred.end(), pj.begin(), pj.end());
    all_truth.insert(all_truth.end(), tj.begin(), tj.end());
  }
  out.average.mae = mae(all_pred, all_truth);
  out.average.rmse = rmse(all_pred, all_truth);
  try {
    out.average.mape_pct =
        mape(all_pred, all_truth, mape_eps, &out.average.mape_excluded);
  } catch (const NumericError&) {
    out.average.mape_pct = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double jaccard_distance(
    const std::vector<std::vector<std::vector<std::uint8_t>>>& mask_log) {
  if (mask_log.empty()) throw ContractError("jaccard_distance: no iterations");
  double total = 0.0;
  const double k_iters = static_cast<double>(mask_log.size());
  for (const auto& batches : mask_log) {
    const size_t b = batches.size();
    if (b < 2)
      throw ContractError("jaccard_distance: iteration needs >= 2 batches");
    for (const auto& m : batches) {
      bool any = false;
      for (auto x : m) any = any || x;
      if (!any) throw ContractError("jaccard_distance: all-zero mask");
    }
    double iter_sum = 0.0;
    for (size_t t = 0; t < b; ++t)
      for (size_t u = t + 1; u < b; ++u) {
        const auto& m1 = batches[t];
        const auto& m2 = batches[u];
        if (m1.size() != m2.size())
          throw ContractError("jaccard_distance: mask length mismatch");
        int inter = 0, uni = 0;
        for (size_t i = 0; i < m1.size(); ++i) {
          inter += (m1[i] && m2[i]);
          uni += (m1[i] || m2[i]);
        }
        if (uni == 0)
          throw ContractError("jaccard_distance: all-zero mask pair");
        iter_sum += static_cast<double>(inter) / uni;
      }
    // Each iteration is averaged with its own batch count.
    total += 2.0 * iter_sum / (static_cast<double>(b) * (b - 1));
  }
  return 1.0 - total / k_iters;
}

void write_metrics_csv(const HorizonMetrics& m, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParseError("cannot write " + path);
  std::fprintf(f, "step,mae,rmse,mape_pct,mape_excluded\n");
  for (size_t j = 0; j < m.per_step.size(); ++j) {
    const auto& r = m.per_step[j];
    std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%d\n", j + 1, r.mae, r.rmse,
                 r.mape_pct, r.mape_excluded);
  }
  std::fprintf(f, "avg,%.17g,%.17g,%.17g,%d\n", m.average.mae, m.average.rmse,
               m.average.mape_pct, m.average.mape_excluded);
  std::fclose(f);
}

}  // namespace vip
