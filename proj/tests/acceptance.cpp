// End-to-end acceptance checks. Each test case prints one [PASS]/[FAIL]
// line; doctest assertions make the binary's exit status reflect the result.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "vip/baselines.hpp"
#include "vip/io.hpp"
#include "vip/training.hpp"

using namespace vip;

namespace {

void report(int criterion, bool ok, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion,
              what.c_str());
  std::fflush(stdout);
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

WindowSample random_window(const ModelDims& d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1, 1);
  WindowSample w;
  w.x_in.resize(static_cast<size_t>(d.n) * d.l);
  w.x_out.resize(static_cast<size_t>(d.n) * d.l_out);
  for (double& x : w.x_in) x = unif(rng);
  for (double& x : w.x_out) x = unif(rng);
  for (int t = 0; t < d.l; ++t) {
    w.tod_index.push_back(static_cast<int>(rng() % d.tod_steps));
    w.dow_index.push_back(static_cast<int>(rng() % d.dow_steps));
  }
  return w;
}

NormalizedAdjacency random_norm_adj(int n, std::mt19937_64& rng) {
  AdjacencyMatrix a;
  a.n = n;
  a.a.assign(static_cast<size_t>(n) * n, 0.0);
  std::uniform_real_distribution<double> unif(0, 1);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (unif(rng) < 0.5) a.at(i, j) = a.at(j, i) = unif(rng) + 0.1;
  return normalize_adjacency(a);
}

ModelDims scaled_dims(int n) {
  ModelDims d;
  d.n = n;
  d.l = 12;
  d.l_out = 12;
  d.q = 24;
  d.d = 6;
  d.d_tod = 6;
  d.d_dow = 6;
  d.d_v = 6;
  d.tod_steps = 96;
  d.dow_steps = 7;
  d.layers = 2;
  d.heads = 4;
  return d;
}

ModelDims micro_dims(int n) {
  ModelDims d;
  d.n = n;
  d.l = 4;
  d.l_out = 4;
  d.q = 8;
  d.d = 2;
  d.d_tod = 2;
  d.d_dow = 2;
  d.d_v = 2;
  d.tod_steps = 96;
  d.dow_steps = 7;
  d.layers = 2;
  d.heads = 2;
  d.residual = false;
  return d;
}

// Shared synthetic experiment for the STCV claim and the ablation direction:
// per seed, one pretrain feeding three pruning runs (full method, random
// pinned selection, no-extrapolation ablation).
struct Experiment {
  std::vector<double> rmse_vip, rmse_rand, rmse_no_extra;
  double wall_seconds = 0.0;
  std::string error;
};

const Experiment& shared_experiment() {
  static const Experiment exp = [] {
    Experiment e;
    const double t0 = now_seconds();
    try {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SynthConfig sc;
        sc.n = 40;
        sc.t_total = 4000;
        sc.k_d = 8;
        sc.noise = 0.1;
        sc.period = 96;
        sc.interval_seconds = 900;
        auto synth = synth_generate(sc, seed);
        auto data = prepare_dataset(synth.series, synth.adjacency, 0.6, 0.2,
                                    0.2, 12, 12, 5);
        auto dims = scaled_dims(sc.n);

        PretrainConfig pc;
        pc.lr = 2e-3;
        pc.batch_size = 32;
        pc.max_epochs = 8;
        pc.patience = 3;
        pc.seed = seed;
        auto pre = pretrain(data, dims, pc);

        TrainingConfig tc;
        tc.r_b = 0.3;
        tc.r_p = 0.3;
        tc.target_m = 4;
        tc.target_qp = 12;
        tc.lr = 3e-3;
        tc.batch_size = 32;
        tc.epochs_per_iteration = 8;
        tc.patience = 3;
        tc.pretrained = true;
        tc.seed = seed;

        auto vip = train_vip(data, dims, tc, &pre.params);
        e.rmse_vip.push_back(
            evaluate_forecasts(data, data.test, vip.state.params,
                               &vip.state.bridge, &vip.state.mask)
                .average.rmse);

        // Same forecaster and budget, but the selection is a random pinned
        // set, drawn independently of the data seed.
        auto pick = select_random(sc.n, tc.target_m, seed * 7919 + 101);
        auto tc_rand = tc;
        tc_rand.pinned = {pick.indices.begin(), pick.indices.end()};
        auto rnd = train_vip(data, dims, tc_rand, &pre.params);
        e.rmse_rand.push_back(
            evaluate_forecasts(data, data.test, rnd.state.params,
                               &rnd.state.bridge, &rnd.state.mask)
                .average.rmse);

        auto tc_ne = tc;
        tc_ne.no_extra = true;
        auto ne = train_vip(data, dims, tc_ne, &pre.params);
        VipOptions ne_opts;
        ne_opts.no_extra = true;
        e.rmse_no_extra.push_back(
            evaluate_forecasts(data, data.test, ne.state.params,
                               &ne.state.bridge, &ne.state.mask, ne_opts)
                .average.rmse);
      }
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    e.wall_seconds = now_seconds() - t0;
    return e;
  }();
  return exp;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("criterion 1: gradient correctness of the full masked forward") {
  bool ok = false;
  double err = -1, secs = -1;
  try {
    const double t0 = now_seconds();
    std::mt19937_64 rng(31);
    ModelDims dims;
    dims.n = 5;
    dims.l = 4;
    dims.l_out = 4;
    dims.q = 16;
    dims.d = 4;
    dims.d_tod = 4;
    dims.d_dow = 4;
    dims.d_v = 4;
    dims.tod_steps = 12;
    dims.dow_steps = 7;
    dims.layers = 2;
    dims.heads = 4;
    auto params = init_params(5, dims, 32);
    auto a_norm = random_norm_adj(5, rng);
    auto bridge = init_bridge(5, dims.d_v, 33);
    auto w = random_window(dims, rng);

    MaskState mask;
    mask.b = {1, 0, 1, 0, 0};
    mask.p = {1, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1};
    mask.b_hat = init_b_hat(a_norm);
    mask.p_hat = init_p_hat(dims.q, 34);

    std::vector<TensorPtr> leaves = params.leaves();
    for (auto& t : bridge.leaves(false)) leaves.push_back(t);
    leaves.push_back(mask.b_hat);
    leaves.push_back(mask.p_hat);
    err = grad_check(
        [&](Tape& t) {
          return main_loss(t, forward_vip(t, w, mask, params, bridge, a_norm),
                           w.x_out);
        },
        leaves);
    secs = now_seconds() - t0;
    ok = err < 1e-4 && secs < 60.0;
  } catch (const std::exception& ex) {
    std::printf("criterion 1 raised: %s\n", ex.what());
  }
  report(1, ok,
         "finite-difference check on every trainable leaf (max rel err " +
             std::to_string(err) + ", " + std::to_string(secs) + " s)");
  CHECK(ok);
}

TEST_CASE("criterion 2: retention schedule exactness") {
  bool ok = true;
  std::string detail;
  try {
    struct Combo {
      int n;
      double r_b;
      int m;
    };
    for (const Combo c : {Combo{10, 0.1, 1}, Combo{170, 0.1, 17},
                          Combo{307, 0.1, 30}, Combo{40, 0.5, 4}}) {
      SynthConfig sc;
      sc.n = c.n;
      sc.t_total = 160;
      sc.k_d = std::max(2, c.n / 5);
      sc.noise = 0.1;
      sc.period = 24;
      sc.interval_seconds = 900;
      auto synth = synth_generate(sc, 3);
      auto data = prepare_dataset(synth.series, synth.adjacency, 0.6, 0.2, 0.2,
                                  4, 4, 16);
      auto dims = micro_dims(c.n);
      TrainingConfig tc;
      tc.r_b = c.r_b;
      tc.r_p = 0.5;
      tc.target_m = c.m;
      tc.target_qp = 4;
      tc.batch_size = 16;
      tc.epochs_per_iteration = 1;
      tc.patience = 0;
      tc.pretrained = false;
      tc.seed = 4;
      auto res = train_vip(data, dims, tc);

      const int total_k = std::max(iterations_to_target(c.n, c.r_b, c.m), 1);
      if (static_cast<int>(res.record.retained_counts.size()) != total_k)
        ok = false;
      for (int k = 1; k <= total_k; ++k) {
        const int formula = retained_count(c.n, c.r_b, k);
        const int expected = (k == total_k) ? c.m : std::max(formula, c.m);
        const int got = res.record.retained_counts[static_cast<size_t>(k - 1)];
        if (got != expected) ok = false;
        // Wherever the geometric law stays above the budget, the recorded
        // count must equal it exactly.
        if (formula >= c.m && got != formula) ok = false;
      }
      if (res.state.mask.selected_count() != c.m) ok = false;
      detail += " n=" + std::to_string(c.n) + "->final " +
                std::to_string(res.state.mask.selected_count());
    }
  } catch (const std::exception& ex) {
    ok = false;
    std::printf("criterion 2 raised: %s\n", ex.what());
  }
  report(2, ok, "per-iteration retained counts follow the geometric law;" +
                    detail);
  CHECK(ok);
}

TEST_CASE("criterion 3: masked attention reduces to base attention") {
  bool ok = false;
  try {
    std::mt19937_64 rng(41);
    ModelDims dims = micro_dims(3);
    auto params = init_params(3, dims, 42);
    std::vector<std::uint8_t> p(static_cast<size_t>(dims.q), 1);
    auto p_hat = Tensor::full({dims.q}, 1.0, true);
    std::uniform_real_distribution<double> unif(-1, 1);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> ev(static_cast<size_t>(3) * dims.l * dims.q);
      for (double& x : ev) x = unif(rng);
      auto e = Tensor::from({3, dims.l, dims.q}, ev);
      Tape t(false);
      auto base = temporal_attention(t, e, params.layers[0], dims);
      auto masked = masked_attention(t, e, p, p_hat, params.layers[0], dims);
      for (size_t i = 0; i < base->v.size(); ++i)
        worst = std::max(worst, std::abs(base->v[i] - masked->v[i]));
    }
    ok = worst < 1e-12;
  } catch (const std::exception& ex) {
    std::printf("criterion 3 raised: %s\n", ex.what());
  }
  report(3, ok, "all-ones mask equals unmasked attention within 1e-12 on 20 "
                "random instances");
  CHECK(ok);
}

TEST_CASE("criterion 4: replay sampling distribution") {
  bool ok = false;
  try {
    auto run = [](double alpha) {
      ReplayBuffer buf(8, ReplayPolicy::PVR, alpha);
      std::vector<double> prio = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
      for (int i = 0; i < 8; ++i) {
        ReplaySample s;
        s.window.x_in = {static_cast<double>(i)};
        s.priority = prio[static_cast<size_t>(i)];
        buf.push(std::move(s));
      }
      double z = 0;
      for (double p : prio) z += std::pow(p, alpha);
      std::mt19937_64 rng(99);
      std::vector<int> hits(8, 0);
      const int draws = 100000;
      for (int d = 0; d < draws; ++d) {
        auto s = buf.sample_for_replay(rng);
        ++hits[static_cast<size_t>(s->window.x_in[0])];
      }
      double worst = 0;
      for (int i = 0; i < 8; ++i) {
        const double expect = std::pow(prio[static_cast<size_t>(i)], alpha) / z;
        const double got = hits[static_cast<size_t>(i)] / double(draws);
        worst = std::max(worst, std::abs(expect - got));
      }
      return worst;
    };
    const double dev_prop = run(0.6);
    const double dev_unif = run(0.0);
    ok = dev_prop < 0.01 && dev_unif < 0.01;
  } catch (const std::exception& ex) {
    std::printf("criterion 4 raised: %s\n", ex.what());
  }
  report(4, ok, "empirical frequencies match the alpha-weighted law within "
                "1% at alpha=0.6 and alpha=0");
  CHECK(ok);
}

TEST_CASE("criterion 5: synthetic chosen-variable forecasting claim") {
  const auto& e = shared_experiment();
  bool ok = false;
  std::string detail;
  if (!e.error.empty()) {
    detail = "experiment raised: " + e.error;
  } else {
    int wins = 0;
    for (size_t i = 0; i < 5; ++i)
      if (e.rmse_vip[i] < e.rmse_rand[i]) ++wins;
    const double improvement =
        (mean(e.rmse_rand) - mean(e.rmse_vip)) / mean(e.rmse_rand);
    ok = wins >= 4 && improvement >= 0.10 && e.wall_seconds < 1800.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "wins %d/5, mean RMSE %.3f vs random %.3f (%.1f%% better), "
                  "%.0f s",
                  wins, mean(e.rmse_vip), mean(e.rmse_rand),
                  improvement * 100.0, e.wall_seconds);
    detail = buf;
  }
  report(5, ok, detail);
  CHECK(ok);
}

TEST_CASE("criterion 6: disabling extrapolation degrades accuracy") {
  const auto& e = shared_experiment();
  bool ok = false;
  std::string detail;
  if (!e.error.empty()) {
    detail = "experiment raised: " + e.error;
  } else {
    int worse = 0;
    for (size_t i = 0; i < 5; ++i)
      if (e.rmse_no_extra[i] > e.rmse_vip[i]) ++worse;
    ok = worse >= 4;
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "no-extrapolation worse in %d/5 seeds (mean RMSE %.3f vs "
                  "%.3f)",
                  worse, mean(e.rmse_no_extra), mean(e.rmse_vip));
    detail = buf;
  }
  report(6, ok, detail);
  CHECK(ok);
}

TEST_CASE("criterion 7: pruned model is smaller and faster") {
  bool ok = false;
  std::string detail;
  try {
    ModelDims dims;
    dims.n = 300;
    dims.layers = 2;
    const std::int64_t full = stmf_param_count(dims);
    const std::int64_t pruned = vip_param_count(dims, dims.q / 2);

    std::mt19937_64 rng(71);
    auto params = init_params(dims.n, dims, 72);
    auto a_norm = random_norm_adj(dims.n, rng);
    auto bridge = init_bridge(dims.n, dims.d_v, 73);
    auto w = random_window(dims, rng);
    MaskState mask;
    mask.b.assign(static_cast<size_t>(dims.n), 0);
    for (int i = 0; i < 30; ++i) mask.b[static_cast<size_t>(i * 10)] = 1;
    mask.p.assign(static_cast<size_t>(dims.q), 0);
    for (int i = 0; i < dims.q / 2; ++i) mask.p[static_cast<size_t>(i)] = 1;
    mask.b_hat = init_b_hat(a_norm);
    mask.p_hat = init_p_hat(dims.q, 74);

    auto time_forward = [&](const std::function<void()>& f) {
      double best = 1e30;
      for (int rep = 0; rep < 3; ++rep) {
        const double t0 = now_seconds();
        f();
        best = std::min(best, now_seconds() - t0);
      }
      return best;
    };
    const double t_full = time_forward([&] {
      Tape t(false);
      forward_stmf(t, w, params);
    });
    const double t_vip = time_forward([&] {
      Tape t(false);
      forward_vip(t, w, mask, params, bridge, a_norm);
    });
    ok = pruned < full && t_full >= 2.0 * t_vip;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "params %lld < %lld, per-window inference %.1fx faster "
                  "(%.3fs vs %.3fs)",
                  static_cast<long long>(pruned), static_cast<long long>(full),
                  t_full / t_vip, t_vip, t_full);
    detail = buf;
  } catch (const std::exception& ex) {
    detail = std::string("raised: ") + ex.what();
  }
  report(7, ok, detail);
  CHECK(ok);
}

TEST_CASE("criterion 8: metric oracles") {
  bool ok = true;
  try {
    std::mt19937_64 rng(81);
    std::uniform_real_distribution<double> unif(-5, 5);
    for (int trial = 0; trial < 100; ++trial) {
      const size_t len = 3 + rng() % 40;
      std::vector<double> pred(len), truth(len);
      for (auto& x : pred) x = unif(rng);
      for (auto& x : truth) x = unif(rng);
      double ae = 0, se = 0, pe = 0;
      int used = 0;
      for (size_t i = 0; i < len; ++i) {
        ae += std::abs(pred[i] - truth[i]);
        se += (pred[i] - truth[i]) * (pred[i] - truth[i]);
        if (std::abs(truth[i]) >= 1.0) {
          pe += std::abs((pred[i] - truth[i]) / truth[i]);
          ++used;
        }
      }
      if (std::abs(mae(pred, truth) - ae / double(len)) > 1e-12) ok = false;
      if (std::abs(rmse(pred, truth) - std::sqrt(se / double(len))) > 1e-12)
        ok = false;
      if (used > 0) {
        int excl = 0;
        if (std::abs(mape(pred, truth, 1.0, &excl) - 100.0 * pe / used) >
            1e-12)
          ok = false;
        if (excl != static_cast<int>(len) - used) ok = false;
      }
    }
    for (int trial = 0; trial < 100; ++trial) {
      const size_t iters = 1 + rng() % 3, batches = 2 + rng() % 4,
                   n = 4 + rng() % 8;
      std::vector<std::vector<std::vector<std::uint8_t>>> log(iters);
      for (auto& it : log) {
        it.resize(batches);
        for (auto& m : it) {
          m.resize(n);
          bool any = false;
          for (auto& x : m) any = (x = rng() % 2) || any;
          if (!any) m[rng() % n] = 1;
        }
      }
      double total = 0;
      for (const auto& it : log) {
        double s = 0;
        int pairs = 0;
        for (size_t a = 0; a < it.size(); ++a)
          for (size_t b = a + 1; b < it.size(); ++b) {
            int inter = 0, uni = 0;
            for (size_t i = 0; i < n; ++i) {
              inter += (it[a][i] && it[b][i]);
              uni += (it[a][i] || it[b][i]);
            }
            s += double(inter) / uni;
            ++pairs;
          }
        total += s / pairs;
      }
      const double expect = 1.0 - total / double(iters);
      if (std::abs(jaccard_distance(log) - expect) > 1e-12) ok = false;
    }
    std::vector<std::uint8_t> m1 = {1, 0, 1, 0}, m2 = {0, 1, 0, 1};
    if (jaccard_distance({{m1, m1}}) != 0.0) ok = false;
    if (jaccard_distance({{m1, m2}}) != 1.0) ok = false;
  } catch (const std::exception& ex) {
    ok = false;
    std::printf("criterion 8 raised: %s\n", ex.what());
  }
  report(8, ok, "MAE/RMSE/MAPE and Jaccard distance match brute force within "
                "1e-12 on 100 random instances");
  CHECK(ok);
}

TEST_CASE("criterion 9: end-to-end pruning runs are byte-deterministic") {
  bool ok = false;
  std::string detail;
  try {
    int rc = std::system("rm -rf acc9 && mkdir -p acc9");
    rc |= std::system(
        "./vipcli synth --out-values acc9/v.csv --out-adjacency acc9/a.csv "
        "--n 12 --t-total 600 --k-d 3 --noise 0.1 --period 24 --interval 900 "
        "--seed 7 > /dev/null");
    std::ofstream cfg("acc9/cfg.txt");
    cfg << "l=4\nl_out=4\nq=8\nd=2\nd_tod=2\nd_dow=2\nd_v=2\nheads=2\n"
           "layers=2\nresidual=0\nstride=4\nbatch_size=16\nlr=0.002\n"
           "r_b=0.5\nr_p=0.5\ntarget_m=3\ntarget_qp=4\n"
           "epochs_per_iteration=2\npatience=0\npretrained=0\nseed=21\n";
    cfg.close();
    for (const char* run : {"r1", "r2"})
      rc |= std::system(("./vipcli train-vip --values acc9/v.csv --adjacency "
                         "acc9/a.csv --config acc9/cfg.txt --run-dir acc9/" +
                         std::string(run) + " > /dev/null")
                            .c_str());
    const std::string sel1 = read_file("acc9/r1/selection.csv");
    const std::string met1 = read_file("acc9/r1/metrics.csv");
    ok = rc == 0 && !sel1.empty() && !met1.empty() &&
         sel1 == read_file("acc9/r2/selection.csv") &&
         met1 == read_file("acc9/r2/metrics.csv");
    detail = "two identical command-line runs produce byte-identical "
             "selection and metrics files";
    rc = std::system("rm -rf acc9");
    (void)rc;
  } catch (const std::exception& ex) {
    detail = std::string("raised: ") + ex.what();
  }
  report(9, ok, detail);
  CHECK(ok);
}
