#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "vip/baselines.hpp"
#include "vip/io.hpp"
#include "vip/training.hpp"

namespace fs = std::filesystem;
using namespace vip;

namespace {

// Every tunable in one flat key=value namespace, shared by the config file
// and the --set overrides. Unknown keys are rejected.
struct RunConfig {
  ModelDims dims;
  int stride = 1;
  double r_train = 0.6, r_val = 0.2, r_test = 0.2;
  PretrainConfig pre;
  TrainingConfig train;
  double mape_eps = 1.0;

  void set(const std::string& key, const std::string& value);
  void apply_file(const std::string& path);
  std::string dump() const;
};

int to_int(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + k + ": " + v);
  }
}

double to_double(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + k + ": " + v);
  }
}

bool to_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean for " + k + ": " + v);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "l") dims.l = to_int(key, value);
  else if (key == "l_out") dims.l_out = to_int(key, value);
  else if (key == "q") dims.q = to_int(key, value);
  else if (key == "d") dims.d = to_int(key, value);
  else if (key == "d_tod") dims.d_tod = to_int(key, value);
  else if (key == "d_dow") dims.d_dow = to_int(key, value);
  else if (key == "d_v") dims.d_v = to_int(key, value);
  else if (key == "layers") dims.layers = to_int(key, value);
  else if (key == "heads") dims.heads = to_int(key, value);
  else if (key == "residual") dims.residual = to_bool(key, value);
  else if (key == "stride") stride = to_int(key, value);
  else if (key == "r_train") r_train = to_double(key, value);
  else if (key == "r_val") r_val = to_double(key, value);
  else if (key == "r_test") r_test = to_double(key, value);
  else if (key == "lr") { pre.lr = to_double(key, value); train.lr = pre.lr; }
  else if (key == "batch_size") {
    pre.batch_size = to_int(key, value);
    train.batch_size = pre.batch_size;
  }
  else if (key == "max_epochs") pre.max_epochs = to_int(key, value);
  else if (key == "pretrain_patience") pre.patience = to_int(key, value);
  else if (key == "patience") train.patience = to_int(key, value);
  else if (key == "r_b") train.r_b = to_double(key, value);
  else if (key == "r_p") train.r_p = to_double(key, value);
  else if (key == "gamma1") train.gamma1 = to_double(key, value);
  else if (key == "gamma2") train.gamma2 = to_double(key, value);
  else if (key == "gamma3") train.gamma3 = to_double(key, value);
  else if (key == "r1") train.r1_count = to_int(key, value);
  else if (key == "r2") train.r2_count = to_int(key, value);
  else if (key == "alpha") train.alpha = to_double(key, value);
  else if (key == "capacity") train.buffer_capacity = to_int(key, value);
  else if (key == "epochs_per_iteration")
    train.epochs_per_iteration = to_int(key, value);
  else if (key == "target_m") train.target_m = to_int(key, value);
  else if (key == "target_qp") train.target_qp = to_int(key, value);
  else if (key == "pretrained") train.pretrained = to_bool(key, value);
  else if (key == "no_extra") train.no_extra = to_bool(key, value);
  else if (key == "no_b_reg") train.no_b_reg = to_bool(key, value);
  else if (key == "no_p_reg") train.no_p_reg = to_bool(key, value);
  else if (key == "no_replay") train.no_replay = to_bool(key, value);
  else if (key == "bridge_softmax") train.bridge_softmax = to_bool(key, value);
  else if (key == "reset_optimizer")
    train.reset_optimizer_each_iteration = to_bool(key, value);
  else if (key == "replay_policy")
    train.replay_policy = replay_policy_from_string(value);
  else if (key == "seed") {
    pre.seed = static_cast<std::uint64_t>(std::stoull(value));
    train.seed = pre.seed;
  }
  else if (key == "mape_eps") mape_eps = to_double(key, value);
  else if (key == "pinned") {
    train.pinned.clear();
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ';'))
      if (!part.empty()) train.pinned.insert(to_int(key, part));
  }
  else throw ConfigError("config: unknown key: " + key);
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config " + path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

std::string RunConfig::dump() const {
  std::ostringstream out;
  out << "l=" << dims.l << "\nl_out=" << dims.l_out << "\nq=" << dims.q
      << "\nd=" << dims.d << "\nd_tod=" << dims.d_tod
      << "\nd_dow=" << dims.d_dow << "\nd_v=" << dims.d_v
      << "\nlayers=" << dims.layers << "\nheads=" << dims.heads
      << "\nresidual=" << (dims.residual ? "true" : "false")
      << "\nstride=" << stride << "\nr_train=" << r_train
      << "\nr_val=" << r_val << "\nr_test=" << r_test << "\nlr=" << train.lr
      << "\nbatch_size=" << train.batch_size
      << "\nmax_epochs=" << pre.max_epochs
      << "\npretrain_patience=" << pre.patience
      << "\npatience=" << train.patience << "\nr_b=" << train.r_b
      << "\nr_p=" << train.r_p << "\ngamma1=" << train.gamma1
      << "\ngamma2=" << train.gamma2 << "\ngamma3=" << train.gamma3
      << "\nr1=" << train.r1_count << "\nr2=" << train.r2_count
      << "\nalpha=" << train.alpha << "\ncapacity=" << train.buffer_capacity
      << "\nepochs_per_iteration=" << train.epochs_per_iteration
      << "\ntarget_m=" << train.target_m << "\ntarget_qp=" << train.target_qp
      << "\npretrained=" << (train.pretrained ? "true" : "false")
      << "\nno_extra=" << (train.no_extra ? "true" : "false")
      << "\nno_b_reg=" << (train.no_b_reg ? "true" : "false")
      << "\nno_p_reg=" << (train.no_p_reg ? "true" : "false")
      << "\nno_replay=" << (train.no_replay ? "true" : "false")
      << "\nbridge_softmax=" << (train.bridge_softmax ? "true" : "false")
      << "\nreset_optimizer="
      << (train.reset_optimizer_each_iteration ? "true" : "false")
      << "\nreplay_policy=" << to_string(train.replay_policy)
      << "\nseed=" << train.seed << "\nmape_eps=" << mape_eps << "\n";
  if (!train.pinned.empty()) {
    out << "pinned=";
    bool first = true;
    for (int i : train.pinned) {
      if (!first) out << ';';
      out << i;
      first = false;
    }
    out << "\n";
  }
  return out.str();
}

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) cfg.apply_file(config_path);
  for (const std::string& ov : overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got: " + ov);
    cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  return cfg;
}

Dataset load_prepared(const std::string& values, const std::string& adjacency,
                      const RunConfig& cfg) {
  auto [series, adj] = load_dataset(values, adjacency);
  return prepare_dataset(series, adj, cfg.r_train, cfg.r_val, cfg.r_test,
                         cfg.dims.l, cfg.dims.l_out, cfg.stride);
}

void write_config_snapshot(const fs::path& run_dir, const RunConfig& cfg) {
  fs::create_directories(run_dir);
  std::ofstream out(run_dir / "config.txt", std::ios::binary);
  out << cfg.dump();
}

int run(int argc, char** argv) {
  CLI::App app{"variable-parameter iterative pruning for spatio-temporal "
               "forecasting"};
  app.require_subcommand(1);

  std::string values, adjacency, run_dir, config_path, checkpoint_path;
  std::string coords_path, out_path, method, split_name = "test";
  std::string drivers_path, record_path, pin_path;
  std::vector<std::string> overrides;
  SynthConfig synth_cfg;
  std::uint64_t synth_seed = 0;
  int select_m = 0;
  std::uint64_t select_seed = 0;

  auto add_common = [&](CLI::App* sub, bool needs_data) {
    if (needs_data) {
      sub->add_option("--values", values, "value CSV")->required();
      sub->add_option("--adjacency", adjacency, "adjacency edge list")
          ->required();
    }
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", overrides, "config override key=value");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--out-values", values)->required();
  synth->add_option("--out-adjacency", adjacency)->required();
  synth->add_option("--out-drivers", drivers_path);
  synth->add_option("--n", synth_cfg.n);
  synth->add_option("--t-total", synth_cfg.t_total);
  synth->add_option("--k-d", synth_cfg.k_d);
  synth->add_option("--noise", synth_cfg.noise);
  synth->add_option("--period", synth_cfg.period);
  synth->add_option("--interval", synth_cfg.interval_seconds);
  synth->add_option("--seed", synth_seed);

  CLI::App* pre = app.add_subcommand("pretrain", "train the base forecaster");
  add_common(pre, true);
  pre->add_option("--run-dir", run_dir)->required();

  CLI::App* tv = app.add_subcommand("train-vip", "iterative pruning run");
  add_common(tv, true);
  tv->add_option("--run-dir", run_dir)->required();
  tv->add_option("--pretrained", checkpoint_path, "base model checkpoint");
  tv->add_option("--pin", pin_path, "first-stage selection file to pin");

  CLI::App* sel = app.add_subcommand("select", "baseline variable selection");
  sel->add_option("--values", values)->required();
  sel->add_option("--adjacency", adjacency)->required();
  sel->add_option("--method", method,
                  "max-value | max-connectivity | grid | random")
      ->required();
  sel->add_option("--m", select_m)->required();
  sel->add_option("--coords", coords_path, "index,x,y CSV (grid method)");
  sel->add_option("--seed", select_seed);
  sel->add_option("--out", out_path)->required();

  CLI::App* ev = app.add_subcommand("evaluate", "metrics for a checkpoint");
  add_common(ev, true);
  ev->add_option("--checkpoint", checkpoint_path)->required();
  ev->add_option("--split", split_name, "train | val | test");
  ev->add_option("--out", out_path, "metrics CSV path")->required();

  CLI::App* rep = app.add_subcommand("report", "summarize a training record");
  rep->add_option("--record", record_path)->required();

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    SynthDataset d = synth_generate(synth_cfg, synth_seed);
    save_values(d.series, values);
    save_adjacency(d.adjacency, adjacency);
    if (!drivers_path.empty()) {
      std::ofstream out(drivers_path, std::ios::binary);
      for (int i : d.drivers) out << i << "\n";
    }
    std::cout << "wrote " << values << " (" << d.series.n << " x "
              << d.series.t_total << ")\n";
    return 0;
  }

  if (pre->parsed()) {
    RunConfig cfg = load_run_config(config_path, overrides);
    Dataset data = load_prepared(values, adjacency, cfg);
    cfg.dims.n = data.n;
    cfg.dims.validate();
    write_config_snapshot(run_dir, cfg);
    PretrainResult r = pretrain(data, cfg.dims, cfg.pre);
    save_checkpoint((fs::path(run_dir) / "pretrained.json").string(), r.params);
    std::cout << "epochs=" << r.epochs_run << " best_val_mae=" << r.best_val_mae
              << "\n";
    return 0;
  }

  if (tv->parsed()) {
    RunConfig cfg = load_run_config(config_path, overrides);
    Dataset data = load_prepared(values, adjacency, cfg);
    cfg.dims.n = data.n;
    cfg.dims.validate();
    if (!pin_path.empty())
      for (auto& [idx, score] : load_selection(pin_path))
        cfg.train.pinned.insert(idx);
    write_config_snapshot(run_dir, cfg);
    ModelParams pretrained;
    const ModelParams* pp = nullptr;
    if (!checkpoint_path.empty()) {
      pretrained = load_checkpoint(checkpoint_path).params;
      pp = &pretrained;
    } else if (cfg.train.pretrained) {
      throw ConfigError("train-vip: pretrained=true needs --pretrained");
    }
    TrainResult r = train_vip(data, cfg.dims, cfg.train, pp);
    fs::path dir(run_dir);
    save_checkpoint((dir / "vip.json").string(), r.state.params,
                    &r.state.bridge, &r.state.mask);
    save_record((dir / "record.jsonl").string(), r.record);
    std::vector<int> sel_idx = r.state.mask.selected_indices();
    std::vector<double> sel_scores;
    for (int i : sel_idx) sel_scores.push_back(r.state.mask.b_hat->v[i]);
    save_selection((dir / "selection.csv").string(), sel_idx, sel_scores);
    HorizonMetrics m =
        evaluate_forecasts(data, data.test, r.state.params, &r.state.bridge,
                           &r.state.mask,
                           {cfg.train.no_extra, cfg.train.bridge_softmax},
                           cfg.mape_eps);
    write_metrics_csv(m, (dir / "metrics.csv").string());
    std::cout << "selected=" << sel_idx.size()
              << " best_val_mae=" << r.best_val_mae
              << " test_mae=" << m.average.mae
              << " wall_s=" << r.record.wall_seconds << "\n";
    return 0;
  }

  if (sel->parsed()) {
    auto [series, adj] = load_dataset(values, adjacency);
    SelectionResult r;
    if (method == "max-value") r = select_max_value(series, select_m);
    else if (method == "max-connectivity")
      r = select_max_connectivity(adj, select_m);
    else if (method == "grid") {
      if (coords_path.empty())
        throw ConfigError("select: grid method needs --coords");
      r = select_grid(load_coords(coords_path, series.n), adj, select_m);
    } else if (method == "random")
      r = select_random(series.n, select_m, select_seed);
    else throw ConfigError("select: unknown method: " + method);
    std::vector<double> picked_scores;
    for (int i : r.indices)
      picked_scores.push_back(r.scores.empty() ? 0.0 : r.scores[i]);
    save_selection(out_path, r.indices, picked_scores);
    std::cout << "selected " << r.indices.size() << " variables ("
              << r.method << ")\n";
    return 0;
  }

  if (ev->parsed()) {
    RunConfig cfg = load_run_config(config_path, overrides);
    Dataset data = load_prepared(values, adjacency, cfg);
    Checkpoint c = load_checkpoint(checkpoint_path);
    const std::vector<WindowSample>* windows = &data.test;
    if (split_name == "train") windows = &data.train;
    else if (split_name == "val") windows = &data.val;
    else if (split_name != "test")
      throw ConfigError("evaluate: unknown split: " + split_name);
    HorizonMetrics m = evaluate_forecasts(
        data, *windows, c.params, c.bridge ? &*c.bridge : nullptr,
        c.mask ? &*c.mask : nullptr,
        {cfg.train.no_extra, cfg.train.bridge_softmax}, cfg.mape_eps);
    write_metrics_csv(m, out_path);
    std::cout << "mae=" << m.average.mae << " rmse=" << m.average.rmse
              << " mape_pct=" << m.average.mape_pct << "\n";
    return 0;
  }

  if (rep->parsed()) {
    TrainRecord rec = load_record(record_path);
    for (size_t k = 0; k < rec.retained_counts.size(); ++k)
      std::cout << "iteration " << (k + 1)
                << ": retained=" << rec.retained_counts[k]
                << " params=" << rec.param_counts[k]
                << " train_loss=" << rec.iter_train_loss[k]
                << " val_mae=" << rec.iter_val_mae[k] << "\n";
    std::cout << "jaccard_distance=" << jaccard_distance(rec.mask_log) << "\n";
    std::cout << "wall_seconds=" << rec.wall_seconds << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const ContractError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
