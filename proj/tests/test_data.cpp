#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "vip/data.hpp"

using namespace vip;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  auto d = fs::temp_directory_path() / "vip_data_test";
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Least-squares fit of y onto the driver columns, returning the residuals.
std::vector<double> lsq_residual(const RawSeries& s,
                                 const std::vector<int>& drivers, int target) {
  const int k = static_cast<int>(drivers.size());
  const int t_len = s.t_total;
  std::vector<double> ata(static_cast<size_t>(k) * k, 0.0), aty(k, 0.0);
  for (int t = 0; t < t_len; ++t) {
    for (int i = 0; i < k; ++i) {
      const double di = s.at(drivers[i], t);
      aty[i] += di * s.at(target, t);
      for (int j = 0; j < k; ++j)
        ata[static_cast<size_t>(i) * k + j] += di * s.at(drivers[j], t);
    }
  }
  // Gaussian elimination with partial pivoting.
  std::vector<double> w = aty;
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int r = col + 1; r < k; ++r)
      if (std::abs(ata[static_cast<size_t>(r) * k + col]) >
          std::abs(ata[static_cast<size_t>(piv) * k + col]))
        piv = r;
    for (int c = 0; c < k; ++c)
      std::swap(ata[static_cast<size_t>(col) * k + c],
                ata[static_cast<size_t>(piv) * k + c]);
    std::swap(w[col], w[piv]);
    for (int r = col + 1; r < k; ++r) {
      const double f = ata[static_cast<size_t>(r) * k + col] /
                       ata[static_cast<size_t>(col) * k + col];
      for (int c = col; c < k; ++c)
        ata[static_cast<size_t>(r) * k + c] -=
            f * ata[static_cast<size_t>(col) * k + c];
      w[r] -= f * w[col];
    }
  }
  for (int col = k - 1; col >= 0; --col) {
    for (int c = col + 1; c < k; ++c)
      w[col] -= ata[static_cast<size_t>(col) * k + c] * w[c];
    w[col] /= ata[static_cast<size_t>(col) * k + col];
  }
  std::vector<double> res(t_len);
  for (int t = 0; t < t_len; ++t) {
    double fit = 0.0;
    for (int i = 0; i < k; ++i) fit += w[i] * s.at(drivers[i], t);
    res[t] = s.at(target, t) - fit;
  }
  return res;
}

}  // namespace

TEST_CASE("load_dataset basics") {
  auto dir = tmp_dir();
  write_file(dir / "v2.csv", "2,3,300,0\n1,2,3\n4,5,6\n");
  write_file(dir / "a2.csv", "0,1,1.0\n");
  auto [s, a] = load_dataset((dir / "v2.csv").string(), (dir / "a2.csv").string());
  CHECK(s.n == 2);
  CHECK(s.t_total == 3);
  CHECK(s.at(1, 2) == 6.0);
  CHECK(a.at(0, 1) == 1.0);
  CHECK(a.at(1, 0) == 1.0);
  CHECK(a.at(0, 0) == 0.0);

  write_file(dir / "bad.csv", "0,999,1.0\n");
  CHECK_THROWS_AS(load_dataset((dir / "v2.csv").string(),
                               (dir / "bad.csv").string()),
                  ParseError);
  write_file(dir / "short.csv", "2,3,300,0\n1,2\n4,5,6\n");
  CHECK_THROWS_AS(load_dataset((dir / "short.csv").string(),
                               (dir / "a2.csv").string()),
                  ParseError);
}

TEST_CASE("PEMS08-shaped dataset round trips") {
  RawSeries s;
  s.n = 170;
  s.t_total = 17856;
  s.interval_seconds = 300;
  s.values.resize(static_cast<size_t>(s.n) * s.t_total);
  for (size_t i = 0; i < s.values.size(); ++i)
    s.values[i] = static_cast<double>(i % 977) * 0.5;
  auto dir = tmp_dir();
  save_values(s, (dir / "pems.csv").string());
  write_file(dir / "pa.csv", "0,1,1\n");
  auto [loaded, a] =
      load_dataset((dir / "pems.csv").string(), (dir / "pa.csv").string());
  CHECK(loaded.n == 170);
  CHECK(loaded.t_total == 17856);
  CHECK(loaded.values == s.values);
  CHECK(a.n == 170);
}

TEST_CASE("z-score fit, apply, invert") {
  RawSeries s;
  s.n = 1;
  s.t_total = 3;
  s.values = {1, 2, 3};
  auto st = zscore_fit(s);
  CHECK(st.mean == doctest::Approx(2.0));
  std::vector<double> x = s.values;
  zscore_apply(x, st);
  CHECK(x[0] + x[1] + x[2] == doctest::Approx(0.0).epsilon(1e-14));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(-5, 5);
  std::vector<double> y(100);
  for (double& v : y) v = unif(rng);
  std::vector<double> z = y;
  zscore_apply(z, st);
  zscore_invert(z, st);
  for (size_t i = 0; i < y.size(); ++i) CHECK(std::abs(z[i] - y[i]) < 1e-10);

  RawSeries c;
  c.n = 1;
  c.t_total = 4;
  c.values = {7, 7, 7, 7};
  CHECK_THROWS_AS(zscore_fit(c), ConfigError);
}

TEST_CASE("chronological split") {
  RawSeries s;
  s.n = 1;
  s.t_total = 100;
  s.interval_seconds = 300;
  s.values.resize(100);
  for (int t = 0; t < 100; ++t) s.values[t] = t;
  auto sp = split(s, 0.6, 0.2, 0.2, 5);
  CHECK(sp.train.t_total == 60);
  CHECK(sp.val.t_total == 20);
  CHECK(sp.test.t_total == 20);
  CHECK(sp.val.values[0] == 60.0);
  CHECK(sp.test.values[0] == 80.0);

  RawSeries big;
  big.n = 1;
  big.t_total = 34272;
  big.interval_seconds = 300;
  big.values.assign(34272, 0.0);
  for (int t = 0; t < big.t_total; ++t) big.values[t] = std::sin(t * 0.01);
  auto sp2 = split(big, 0.7, 0.15, 0.15, 24);
  CHECK(std::abs(sp2.train.t_total - 23990) <= 1);
  CHECK(std::abs(sp2.val.t_total - 5141) <= 1);
  CHECK(std::abs(sp2.test.t_total - 5141) <= 1);
  CHECK(sp2.train.t_total + sp2.val.t_total + sp2.test.t_total == 34272);

  CHECK_THROWS_AS(split(s, 0.6, 0.2, 0.1, 5), ConfigError);
  CHECK_THROWS_AS(split(s, 0.96, 0.02, 0.02, 12), ConfigError);
}

TEST_CASE("window construction") {
  RawSeries s;
  s.n = 2;
  s.t_total = 36;
  s.interval_seconds = 300;
  s.start_offset = 286;
  s.values.resize(72);
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t < 36; ++t) s.at(i, t) = i * 100 + t;
  auto w = make_windows(s, 12, 12, 1);
  CHECK(w.size() == 13);
  CHECK(w[0].x_out[0] == 12.0);  // first x_out starts at step l
  CHECK(w[0].x_in[11] == 11.0);

  auto nw = make_windows(s, 12, 12, 24);
  CHECK(nw.size() == 1);

  // tod advances by 1 mod D; dow increments when tod wraps.
  CHECK(w[0].tod_index[0] == 286);
  CHECK(w[0].tod_index[1] == 287);
  CHECK(w[0].dow_index[1] == 0);
  CHECK(w[0].tod_index[2] == 0);
  CHECK(w[0].dow_index[2] == 1);
  for (size_t i = 1; i < w[0].tod_index.size(); ++i)
    CHECK(w[0].tod_index[i] == (w[0].tod_index[i - 1] + 1) % 288);
}

TEST_CASE("adjacency normalization") {
  AdjacencyMatrix none;
  none.n = 3;
  none.a.assign(9, 0.0);
  auto id = normalize_adjacency(none);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(id.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));

  AdjacencyMatrix pair;
  pair.n = 2;
  pair.a = {0, 1, 1, 0};
  auto norm = normalize_adjacency(pair);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j)
      CHECK(norm.at(i, j) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(norm.row_sum(i) == doctest::Approx(1.0).epsilon(1e-14));
  }

  // Brute force on random 8-node graphs.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    AdjacencyMatrix a;
    a.n = 8;
    a.a.assign(64, 0.0);
    for (int i = 0; i < 8; ++i)
      for (int j = i + 1; j < 8; ++j)
        if (unif(rng) < 0.4) a.at(i, j) = a.at(j, i) = unif(rng) + 0.1;
    auto got = normalize_adjacency(a);
    std::vector<double> with_loops(64);
    std::vector<double> deg(8, 0.0);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        with_loops[static_cast<size_t>(i) * 8 + j] =
            a.at(i, j) + (i == j ? 1.0 : 0.0);
        deg[i] += a.at(i, j) + (i == j ? 1.0 : 0.0);
      }
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const double expect = with_loops[static_cast<size_t>(i) * 8 + j] /
                              std::sqrt(deg[i] * deg[j]);
        CHECK(std::abs(got.at(i, j) - expect) < 1e-12);
        CHECK(std::abs(got.at(i, j) - got.at(j, i)) < 1e-12);
      }
  }

  AdjacencyMatrix neg;
  neg.n = 2;
  neg.a = {0, -1, -1, 0};
  CHECK_THROWS_AS(normalize_adjacency(neg), ContractError);
}

TEST_CASE("synthetic generator") {
  SynthConfig cfg;
  cfg.n = 40;
  cfg.t_total = 2000;
  cfg.k_d = 8;
  cfg.noise = 0.0;
  auto d = synth_generate(cfg, 123);
  CHECK(static_cast<int>(d.drivers.size()) == 8);

  // Noiseless non-drivers are exact linear combinations of the drivers.
  std::vector<bool> is_driver(40, false);
  for (int i : d.drivers) is_driver[static_cast<size_t>(i)] = true;
  for (int v = 0; v < 40; ++v) {
    if (is_driver[static_cast<size_t>(v)]) continue;
    auto res = lsq_residual(d.series, d.drivers, v);
    for (double r : res) CHECK(std::abs(r) < 1e-10);
    // Adjacency must link the non-driver to at least two drivers.
    int links = 0;
    for (int j : d.drivers) links += d.adjacency.at(v, j) != 0.0 ? 1 : 0;
    CHECK(links >= 2);
  }

  // Determinism: same seed, byte-identical files.
  auto dir = tmp_dir();
  auto d2 = synth_generate(cfg, 123);
  save_values(d.series, (dir / "s1.csv").string());
  save_values(d2.series, (dir / "s2.csv").string());
  save_adjacency(d.adjacency, (dir / "g1.csv").string());
  save_adjacency(d2.adjacency, (dir / "g2.csv").string());
  CHECK(slurp(dir / "s1.csv") == slurp(dir / "s2.csv"));
  CHECK(slurp(dir / "g1.csv") == slurp(dir / "g2.csv"));

  // Residual std tracks the noise knob.
  cfg.noise = 0.1;
  cfg.t_total = 4000;
  auto noisy = synth_generate(cfg, 9);
  std::vector<bool> nd(40, false);
  for (int i : noisy.drivers) nd[static_cast<size_t>(i)] = true;
  double pooled = 0.0;
  int count = 0;
  for (int v = 0; v < 40; ++v) {
    if (nd[static_cast<size_t>(v)]) continue;
    auto res = lsq_residual(noisy.series, noisy.drivers, v);
    for (double r : res) pooled += r * r;
    count += static_cast<int>(res.size());
  }
  const double res_std = std::sqrt(pooled / count);
  CHECK(res_std > 0.08);
  CHECK(res_std < 0.12);

  cfg.k_d = 40;
  CHECK_THROWS_AS(synth_generate(cfg, 1), ConfigError);
}
