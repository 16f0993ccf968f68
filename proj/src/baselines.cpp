#include "vip/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace vip {

namespace {

void check_m(int m, int n) {
  if (m < 1 || m > n)
    throw ConfigError("selector: need 1 <= m <= n, got m=" + std::to_string(m) +
                      ", n=" + std::to_string(n));
}

// Top-m indices by score, ties keeping the lowest index.
std::vector<int> top_m(const std::vector<double>& scores, int m) {
  std::vector<int> idx(scores.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
      return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    return a < b;
  });
  idx.resize(static_cast<size_t>(m));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

SelectionResult select_max_value(const RawSeries& series, int m) {
  check_m(m, series.n);
  std::vector<double> means(static_cast<size_t>(series.n), 0.0);
  for (int i = 0; i < series.n; ++i) {
    double s = 0.0;
    for (int t = 0; t < series.t_total; ++t) s += series.at(i, t);
    means[static_cast<size_t>(i)] = s / series.t_total;
  }
  return {top_m(means, m), "max-value", means};
}

SelectionResult select_max_connectivity(const AdjacencyMatrix& a, int m) {
  check_m(m, a.n);
  std::vector<double> deg(static_cast<size_t>(a.n));
  for (int i = 0; i < a.n; ++i) deg[static_cast<size_t>(i)] = a.degree(i);
  return {top_m(deg, m), "max-connectivity", deg};
}

SelectionResult select_grid(const std::vector<std::pair<double, double>>& coords,
                            const AdjacencyMatrix& a, int m) {
  check_m(m, a.n);
  if (static_cast<int>(coords.size()) != a.n)
    throw ConfigError("select_grid: coordinates required for every variable");

  double xmin = coords[0].first, xmax = coords[0].first;
  double ymin = coords[0].second, ymax = coords[0].second;
  for (const auto& [x, y] : coords) {
    xmin = std::min(xmin, x); xmax = std::max(xmax, x);
    ymin = std::min(ymin, y); ymax = std::max(ymax, y);
  }
  const int cells = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  const double dx = (xmax > xmin) ? (xmax - xmin) / cells : 1.0;
  const double dy = (ymax > ymin) ? (ymax - ymin) / cells : 1.0;

  std::vector<double> deg(static_cast<size_t>(a.n));
  for (int i = 0; i < a.n; ++i) deg[static_cast<size_t>(i)] = a.degree(i);

  // Highest-degree node per non-empty cell, lowest index on ties.
  std::vector<int> best(static_cast<size_t>(cells) * cells, -1);
  for (int i = 0; i < a.n; ++i) {
    int cx = std::min(cells - 1, static_cast<int>((coords[static_cast<size_t>(i)].first - xmin) / dx));
    int cy = std::min(cells - 1, static_cast<int>((coords[static_cast<size_t>(i)].second - ymin) / dy));
    int& slot = best[static_cast<size_t>(cx) * cells + cy];
    if (slot < 0 || deg[static_cast<size_t>(i)] > deg[static_cast<size_t>(slot)])
      slot = i;
  }
  std::vector<int> picked;
  for (int i : best)
    if (i >= 0) picked.push_back(i);

  if (static_cast<int>(picked.size()) > m) {
    // Keep the m highest-degree candidates.
    std::sort(picked.begin(), picked.end(), [&](int x, int y) {
      if (deg[static_cast<size_t>(x)] != deg[static_cast<size_t>(y)])
        return deg[static_cast<size_t>(x)] > deg[static_cast<size_t>(y)];
      return x < y;
    });
    picked.resize(static_cast<size_t>(m));
  } else if (static_cast<int>(picked.size()) < m) {
    // Fill with the next-highest-degree unselected nodes globally.
    std::vector<bool> taken(static_cast<size_t>(a.n), false);
    for (int i : picked) taken[static_cast<size_t>(i)] = true;
    auto rest = top_m(deg, a.n);
    std::sort(rest.begin(), rest.end(), [&](int x, int y) {
      if (deg[static_cast<size_t>(x)] != deg[static_cast<size_t>(y)])
        return deg[static_cast<size_t>(x)] > deg[static_cast<size_t>(y)];
      return x < y;
    });
    for (int i : rest) {
      if (static_cast<int>(picked.size()) >= m) break;
      if (!taken[static_cast<size_t>(i)]) picked.push_back(i);
    }
  }
  std::sort(picked.begin(), picked.end());
  return {picked, "grid", deg};
}

SelectionResult select_random(int n, int m, std::uint64_t seed) {
  check_m(m, n);
  std::mt19937_64 rng(seed);
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<size_t>(m));
  std::sort(idx.begin(), idx.end());
  return {idx, "random", {}};
}

std::set<int> hybrid_pin(const SelectionResult& first_stage, int m) {
  const int expected = (m + 1) / 2;
  if (static_cast<int>(first_stage.indices.size()) != expected)
    throw ConfigError("hybrid_pin: first stage must select ceil(m/2) = " +
                      std::to_string(expected) + " variables");
  return {first_stage.indices.begin(), first_stage.indices.end()};
}

std::vector<std::pair<double, double>> load_coords(const std::string& path,
                                                   int n) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open coordinates file " + path);
  std::vector<std::pair<double, double>> coords(
      static_cast<size_t>(n), {std::nan(""), std::nan("")});
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') ||
        !std::getline(ss, c))
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected index,x,y");
    const int i = std::stoi(a);
    if (i < 0 || i >= n)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": index out of range");
    coords[static_cast<size_t>(i)] = {std::stod(b), std::stod(c)};
  }
  for (const auto& [x, y] : coords)
    if (std::isnan(x) || std::isnan(y))
      throw ParseError(path + ": coordinates missing for some variables");
  return coords;
}

}  // namespace vip
