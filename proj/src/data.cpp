#include "vip/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace vip {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

double parse_double(const std::string& s, const std::string& path, int lineno) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path + ":" + std::to_string(lineno) +
                     ": malformed number '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::string& path, int lineno) {
  try {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path + ":" + std::to_string(lineno) +
                     ": malformed integer '" + s + "'");
  }
}

void write_double(std::FILE* f, double v) {
  std::fprintf(f, "%.17g", v);
}

}  // namespace

std::pair<RawSeries, AdjacencyMatrix> load_dataset(
    const std::string& values_path, const std::string& adjacency_path) {
  std::ifstream vf(values_path);
  if (!vf) throw ParseError("cannot open value file " + values_path);

  RawSeries s;
  std::string line;
  int lineno = 0;
  if (!std::getline(vf, line))
    throw ParseError(values_path + ":1: missing header");
  ++lineno;
  auto hdr = split_csv(line);
  if (hdr.size() != 4)
    throw ParseError(values_path +
                     ":1: header must be n,T_total,interval_seconds,start_offset");
  s.n = parse_int(hdr[0], values_path, 1);
  s.t_total = parse_int(hdr[1], values_path, 1);
  s.interval_seconds = parse_int(hdr[2], values_path, 1);
  s.start_offset = parse_int(hdr[3], values_path, 1);
  if (s.n < 2 || s.t_total < 1 || s.interval_seconds < 1)
    throw ParseError(values_path + ":1: invalid header values");
  s.values.resize(static_cast<size_t>(s.n) * s.t_total);

  for (int i = 0; i < s.n; ++i) {
    if (!std::getline(vf, line))
      throw ParseError(values_path + ":" + std::to_string(lineno + 1) +
                       ": expected " + std::to_string(s.n) + " variable rows");
    ++lineno;
    auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != s.t_total)
      throw ParseError(values_path + ":" + std::to_string(lineno) + ": row has " +
                       std::to_string(fields.size()) + " values, expected " +
                       std::to_string(s.t_total));
    for (int t = 0; t < s.t_total; ++t)
      s.at(i, t) = parse_double(fields[static_cast<size_t>(t)], values_path, lineno);
  }

  std::ifstream af(adjacency_path);
  if (!af) throw ParseError("cannot open adjacency file " + adjacency_path);
  AdjacencyMatrix adj;
  adj.n = s.n;
  adj.a.assign(static_cast<size_t>(s.n) * s.n, 0.0);
  lineno = 0;
  while (std::getline(af, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != 3)
      throw ParseError(adjacency_path + ":" + std::to_string(lineno) +
                       ": expected i,j,weight");
    const int i = parse_int(fields[0], adjacency_path, lineno);
    const int j = parse_int(fields[1], adjacency_path, lineno);
    const double w = parse_double(fields[2], adjacency_path, lineno);
    if (i < 0 || i >= s.n || j < 0 || j >= s.n)
      throw ParseError(adjacency_path + ":" + std::to_string(lineno) +
                       ": edge (" + std::to_string(i) + "," + std::to_string(j) +
                       ") references node outside [0," + std::to_string(s.n) + ")");
    adj.at(i, j) = w;
    adj.at(j, i) = w;
  }
  return {std::move(s), std::move(adj)};
}

void save_values(const RawSeries& s, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParseError("cannot write " + path);
  std::fprintf(f, "%d,%d,%d,%d\n", s.n, s.t_total, s.interval_seconds,
               s.start_offset);
  for (int i = 0; i < s.n; ++i) {
    for (int t = 0; t < s.t_total; ++t) {
      if (t) std::fputc(',', f);
      write_double(f, s.at(i, t));
    }
    std::fputc('\n', f);
  }
  std::fclose(f);
}

void save_adjacency(const AdjacencyMatrix& a, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParseError("cannot write " + path);
  for (int i = 0; i < a.n; ++i)
    for (int j = i + 1; j < a.n; ++j)
      if (a.at(i, j) != 0.0) {
        std::fprintf(f, "%d,%d,", i, j);
        write_double(f, a.at(i, j));
        std::fputc('\n', f);
      }
  std::fclose(f);
}

NormStats zscore_fit(const RawSeries& train) {
  double mean = 0.0;
  for (double x : train.values) mean += x;
  mean /= static_cast<double>(train.values.size());
  double var = 0.0;
  for (double x : train.values) var += (x - mean) * (x - mean);
  var /= static_cast<double>(train.values.size());
  const double sd = std::sqrt(var);
  if (sd == 0.0)
    throw ConfigError("zscore_fit: constant training series (std = 0)");
  return {mean, sd};
}

void zscore_apply(std::vector<double>& x, const NormStats& stats) {
  for (double& v : x) v = (v - stats.mean) / stats.std;
}

void zscore_invert(std::vector<double>& x, const NormStats& stats) {
  for (double& v : x) v = v * stats.std + stats.mean;
}

SplitSeries split(const RawSeries& series, double r_train, double r_val,
                  double r_test, int min_len) {
  if (r_train <= 0 || r_val <= 0 || r_test <= 0 ||
      std::abs(r_train + r_val + r_test - 1.0) > 1e-9)
    throw ConfigError("split: ratios must be positive and sum to 1");
  const int t_train = static_cast<int>(std::llround(r_train * series.t_total));
  const int t_val = static_cast<int>(std::llround(r_val * series.t_total));
  const int t_test = series.t_total - t_train - t_val;
  if (t_train < min_len || t_val < min_len || t_test < min_len)
    throw ConfigError("split: a split is shorter than one window (l + l')");

  auto take = [&](int start, int len) {
    RawSeries out;
    out.n = series.n;
    out.t_total = len;
    out.interval_seconds = series.interval_seconds;
    out.start_offset = series.start_offset + start;
    out.values.resize(static_cast<size_t>(out.n) * len);
    for (int i = 0; i < series.n; ++i)
      for (int t = 0; t < len; ++t) out.at(i, t) = series.at(i, start + t);
    return out;
  };
  return {take(0, t_train), take(t_train, t_val),
          take(t_train + t_val, t_test)};
}

std::vector<WindowSample> make_windows(const RawSeries& series, int l,
                                       int l_out, int stride) {
  if (l < 1 || l_out < 1 || stride < 1)
    throw ConfigError("make_windows: l, l', stride must be >= 1");
  std::vector<WindowSample> out;
  const int span = l + l_out;
  if (series.t_total < span) return out;
  const int count = (series.t_total - span) / stride + 1;
  const int d = series.steps_per_day();
  out.reserve(static_cast<size_t>(count));
  for (int w = 0; w < count; ++w) {
    const int start = w * stride;
    WindowSample ws;
    ws.x_in.resize(static_cast<size_t>(series.n) * l);
    ws.x_out.resize(static_cast<size_t>(series.n) * l_out);
    for (int i = 0; i < series.n; ++i) {
      for (int t = 0; t < l; ++t)
        ws.x_in[static_cast<size_t>(i) * l + t] = series.at(i, start + t);
      for (int t = 0; t < l_out; ++t)
        ws.x_out[static_cast<size_t>(i) * l_out + t] =
            series.at(i, start + l + t);
    }
    ws.tod_index.resize(static_cast<size_t>(l));
    ws.dow_index.resize(static_cast<size_t>(l));
    for (int t = 0; t < l; ++t) {
      const long abs_step = static_cast<long>(series.start_offset) + start + t;
      ws.tod_index[static_cast<size_t>(t)] = static_cast<int>(abs_step % d);
      ws.dow_index[static_cast<size_t>(t)] = static_cast<int>((abs_step / d) % 7);
    }
    out.push_back(std::move(ws));
  }
  return out;
}

NormalizedAdjacency normalize_adjacency(const AdjacencyMatrix& a) {
  const int n = a.n;
  NormalizedAdjacency out;
  out.n = n;
  out.a.assign(static_cast<size_t>(n) * n, 0.0);
  std::vector<double> deg(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double d = 1.0;  // self-loop
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (a.at(i, j) < 0.0)
        throw ContractError("normalize_adjacency: negative entry");
      d += a.at(i, j);
    }
    deg[static_cast<size_t>(i)] = d;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double aij = (i == j) ? 1.0 : a.at(i, j);
      if (aij != 0.0)
        out.a[static_cast<size_t>(i) * n + j] =
            aij / std::sqrt(deg[static_cast<size_t>(i)] * deg[static_cast<size_t>(j)]);
    }
  return out;
}

SynthDataset synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.k_d >= cfg.n)
    throw ConfigError("synth_generate: driver count must be < n");
  if (cfg.k_d < 1 || cfg.n < 2 || cfg.t_total < 2 || cfg.period < 2)
    throw ConfigError("synth_generate: invalid config");

  std::mt19937_64 rng(seed);
  SynthDataset out;
  out.series.n = cfg.n;
  out.series.t_total = cfg.t_total;
  out.series.interval_seconds = cfg.interval_seconds;
  out.series.start_offset = 0;
  out.series.values.assign(static_cast<size_t>(cfg.n) * cfg.t_total, 0.0);
  out.adjacency.n = cfg.n;
  out.adjacency.a.assign(static_cast<size_t>(cfg.n) * cfg.n, 0.0);

  // Drivers occupy the first k_d indices of a random permutation.
  std::vector<int> perm(static_cast<size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) perm[static_cast<size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  out.drivers.assign(perm.begin(), perm.begin() + cfg.k_d);
  std::sort(out.drivers.begin(), out.drivers.end());

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Each driver is a two-harmonic seasonal signal plus an AR(1) wander whose
  // innovation std follows the noise knob, so noise=0 gives a fully
  // deterministic (and hence learnable) series. The first half of the driver
  // set ("public" drivers) generates every non-driver; the second half gets a
  // much stronger wander and feeds no other variable, so its members can only
  // be forecast by observing them directly. This makes the driver set a
  // genuinely optimal selection rather than one informationally equivalent to
  // a random set of mixtures.
  const int n_public = (cfg.k_d + 1) / 2;
  for (int di = 0; di < cfg.k_d; ++di) {
    const int d = out.drivers[static_cast<size_t>(di)];
    const double wander = (di < n_public) ? 0.5 : 4.0 + 2.0 * unif(rng);
    const double level = 2.0 + 2.0 * unif(rng);
    const double amp1 = 0.3 + 0.5 * unif(rng);
    const double amp2 = 0.1 + 0.2 * unif(rng);
    const double phase1 = unif(rng) * cfg.period;
    const double phase2 = unif(rng) * cfg.period;
    double ar = 0.0;
    for (int t = 0; t < cfg.t_total; ++t) {
      ar = 0.98 * ar + wander * 5.0 * cfg.noise * gauss(rng);
      const double w = 2.0 * M_PI / cfg.period;
      out.series.at(d, t) = level + amp1 * std::sin(w * (t + phase1)) +
                            amp2 * std::sin(2.0 * w * (t + phase2)) + ar;
    }
  }

  // Non-drivers: fixed convex combination of 2-3 public drivers, plus noise;
  // the adjacency links each non-driver to its generating drivers.
  for (int i = 0; i < cfg.n; ++i) {
    if (std::binary_search(out.drivers.begin(), out.drivers.end(), i)) continue;
    const int fanin = std::min(n_public, 2 + static_cast<int>(unif(rng) * 2.0));
    std::vector<int> ds(out.drivers.begin(), out.drivers.begin() + n_public);
    std::shuffle(ds.begin(), ds.end(), rng);
    ds.resize(static_cast<size_t>(fanin));
    std::vector<double> w(static_cast<size_t>(fanin));
    double sum = 0.0;
    for (double& x : w) {
      x = 0.2 + unif(rng);
      sum += x;
    }
    for (double& x : w) x /= sum;
    for (int t = 0; t < cfg.t_total; ++t) {
      double v = 0.0;
      for (int k = 0; k < fanin; ++k)
        v += w[static_cast<size_t>(k)] * out.series.at(ds[static_cast<size_t>(k)], t);
      out.series.at(i, t) = v + cfg.noise * gauss(rng);
    }
    // Light edge weights keep the normalized row sums of the hub drivers
    // close to those of the isolated ones, so the initial importance ranking
    // does not hard-wire the selection.
    for (int d : ds) {
      out.adjacency.at(i, d) = 0.01;
      out.adjacency.at(d, i) = 0.01;
    }
  }
  return out;
}

}  // namespace vip
