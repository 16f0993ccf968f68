#include "vip/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace vip {

void Adam::step(const std::vector<TensorPtr>& leaves) {
  if (m_.empty()) {
    m_.resize(leaves.size());
    v_.resize(leaves.size());
    for (size_t i = 0; i < leaves.size(); ++i) {
      m_[i].assign(leaves[i]->v.size(), 0.0);
      v_[i].assign(leaves[i]->v.size(), 0.0);
    }
  }
  if (m_.size() != leaves.size())
    throw ContractError("Adam: leaf count changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (size_t i = 0; i < leaves.size(); ++i) {
    Tensor& p = *leaves[i];
    if (m_[i].size() != p.v.size())
      throw ContractError("Adam: leaf size changed between steps");
    p.ensure_grad();
    for (size_t j = 0; j < p.v.size(); ++j) {
      const double g = p.g[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      const double mh = m_[i][j] / bc1;
      const double vh = v_[i][j] / bc2;
      p.v[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
      if (!std::isfinite(p.v[j]))
        throw NumericError("Adam: parameter became non-finite");
    }
    p.zero_grad();
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

Dataset prepare_dataset(const RawSeries& series, const AdjacencyMatrix& adj,
                        double r_train, double r_val, double r_test, int l,
                        int l_out, int stride) {
  if (adj.n != series.n)
    throw ContractError("prepare_dataset: adjacency size mismatch");
  Dataset d;
  d.n = series.n;
  d.l = l;
  d.l_out = l_out;
  SplitSeries sp = split(series, r_train, r_val, r_test, l + l_out);
  d.stats = zscore_fit(sp.train);
  zscore_apply(sp.train.values, d.stats);
  zscore_apply(sp.val.values, d.stats);
  zscore_apply(sp.test.values, d.stats);
  d.train = make_windows(sp.train, l, l_out, stride);
  d.val = make_windows(sp.val, l, l_out, stride);
  d.test = make_windows(sp.test, l, l_out, stride);
  d.adjacency = adj;
  d.a_norm = normalize_adjacency(adj);
  return d;
}

TensorPtr main_loss(Tape& tape, const TensorPtr& pred,
                    const std::vector<double>& target) {
  if (static_cast<std::int64_t>(target.size()) != pred->size())
    throw ContractError("main_loss: target size mismatch");
  TensorPtr t = Tensor::from(pred->shape, target);
  TensorPtr diff = tape.sub(pred, t);
  return tape.scale(tape.l1_norm(diff), 1.0 / static_cast<double>(pred->size()));
}

TensorPtr sum_loss(Tape& tape, const TensorPtr& main, const TensorPtr& replay,
                   const TensorPtr& b_hat, const TensorPtr& p_hat,
                   const std::vector<int>& r1, const std::vector<int>& r2,
                   double gamma1, double gamma2, double gamma3) {
  TensorPtr total = main;
  if (replay) total = tape.add(total, tape.scale(replay, gamma1));
  if (!r1.empty())
    total = tape.add(
        total, tape.scale(tape.l1_norm(tape.gather_axis0(b_hat, r1)), gamma2));
  if (!r2.empty())
    total = tape.add(
        total, tape.scale(tape.l1_norm(tape.gather_axis0(p_hat, r2)), gamma3));
  return total;
}

double validation_mae(const Dataset& data, const ModelParams& params,
                      const BridgeParams* bridge, const MaskState* mask,
                      const VipOptions& opts) {
  if (data.val.empty()) throw ConfigError("validation_mae: empty split");
  double abs_sum = 0.0;
  std::int64_t count = 0;
  for (const WindowSample& w : data.val) {
    Tape tape(false);
    TensorPtr pred = (mask && bridge)
                         ? forward_vip(tape, w, *mask, params, *bridge,
                                       data.a_norm, opts)
                         : forward_stmf(tape, w, params);
    for (size_t i = 0; i < w.x_out.size(); ++i)
      abs_sum += std::abs(pred->v[i] - w.x_out[i]);
    count += static_cast<std::int64_t>(w.x_out.size());
  }
  return abs_sum / static_cast<double>(count);
}

HorizonMetrics evaluate_forecasts(const Dataset& data,
                                  const std::vector<WindowSample>& windows,
                                  const ModelParams& params,
                                  const BridgeParams* bridge,
                                  const MaskState* mask,
                                  const VipOptions& opts, double mape_eps) {
  if (windows.empty()) throw ConfigError("evaluate_forecasts: no windows");
  std::vector<std::vector<double>> pred, truth;
  pred.reserve(windows.size());
  truth.reserve(windows.size());
  for (const WindowSample& w : windows) {
    Tape tape(false);
    TensorPtr y = (mask && bridge)
                      ? forward_vip(tape, w, *mask, params, *bridge,
                                    data.a_norm, opts)
                      : forward_stmf(tape, w, params);
    std::vector<double> p = y->v;
    std::vector<double> t = w.x_out;
    zscore_invert(p, data.stats);
    zscore_invert(t, data.stats);
    pred.push_back(std::move(p));
    truth.push_back(std::move(t));
  }
  return horizon_metrics(pred, truth, data.n, data.l_out, mape_eps);
}

namespace {

std::vector<size_t> shuffled_indices(size_t count, std::mt19937_64& rng) {
  std::vector<size_t> idx(count);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

std::vector<int> mask_to_indices(const std::vector<std::uint8_t>& m) {
  std::vector<int> idx;
  for (size_t i = 0; i < m.size(); ++i)
    if (m[i]) idx.push_back(static_cast<int>(i));
  return idx;
}

}  // namespace

PretrainResult pretrain(const Dataset& data, const ModelDims& dims,
                        const PretrainConfig& cfg) {
  if (data.train.empty()) throw ConfigError("pretrain: empty training split");
  if (cfg.batch_size < 1) throw ConfigError("pretrain: batch_size must be >= 1");
  PretrainResult res;
  ModelParams params = init_params(data.n, dims, sub_seed(cfg.seed, "init"));
  std::vector<TensorPtr> leaves = params.leaves();
  Adam opt(cfg.lr);
  std::mt19937_64 rng(sub_seed(cfg.seed, "shuffle"));

  double best = std::numeric_limits<double>::infinity();
  int bad = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<size_t> order = shuffled_indices(data.train.size(), rng);
    double loss_sum = 0.0;
    size_t loss_count = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const double inv_b = 1.0 / static_cast<double>(end - start);
      for (size_t i = start; i < end; ++i) {
        const WindowSample& w = data.train[order[i]];
        Tape tape;
        TensorPtr loss = main_loss(tape, forward_stmf(tape, w, params), w.x_out);
        loss_sum += loss->v[0];
        ++loss_count;
        tape.backward(tape.scale(loss, inv_b));
      }
      opt.step(leaves);
    }
    res.epoch_train_loss.push_back(loss_sum / static_cast<double>(loss_count));
    const double val = validation_mae(data, params, nullptr, nullptr);
    res.epoch_val_mae.push_back(val);
    res.epochs_run = epoch + 1;
    if (val < best - 1e-12) {
      best = val;
      res.params = params.clone();
      bad = 0;
    } else if (++bad > cfg.patience) {
      break;
    }
  }
  res.best_val_mae = best;
  return res;
}

TrainResult train_vip(const Dataset& data, const ModelDims& dims,
                      const TrainingConfig& cfg,
                      const ModelParams* pretrained_params) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = data.n;
  if (cfg.target_m < 1 || cfg.target_m >= n)
    throw ConfigError("train_vip: target_m must be in [1, n)");
  if (cfg.target_qp < 1 || cfg.target_qp > dims.q)
    throw ConfigError("train_vip: target_qp must be in [1, q]");
  if (static_cast<int>(cfg.pinned.size()) > cfg.target_m)
    throw ConfigError("train_vip: more pinned variables than target_m");
  for (int i : cfg.pinned)
    if (i < 0 || i >= n) throw ConfigError("train_vip: pinned index out of range");
  if (data.train.empty()) throw ConfigError("train_vip: empty training split");
  if (cfg.pretrained && !pretrained_params)
    throw ConfigError("train_vip: pretrained requested but no checkpoint given");

  ModelParams params = cfg.pretrained
                           ? pretrained_params->clone()
                           : init_params(n, dims, sub_seed(cfg.seed, "init"));
  BridgeParams bridge = init_bridge(n, dims.d_v, sub_seed(cfg.seed, "bridge"));
  VipOptions opts;
  opts.no_extra = cfg.no_extra;
  opts.bridge_softmax = cfg.bridge_softmax;

  MaskState mask;
  mask.b.assign(static_cast<size_t>(n), 1);
  mask.p.assign(static_cast<size_t>(dims.q), 1);
  mask.b_hat = init_b_hat(data.a_norm);
  mask.p_hat = init_p_hat(dims.q, sub_seed(cfg.seed, "p_hat"));
  mask.pinned = cfg.pinned;

  std::vector<TensorPtr> leaves = params.leaves();
  for (const TensorPtr& t : bridge.leaves(cfg.no_extra)) leaves.push_back(t);
  leaves.push_back(mask.b_hat);
  leaves.push_back(mask.p_hat);

  Adam opt(cfg.lr);
  std::mt19937_64 rng_shuffle(sub_seed(cfg.seed, "shuffle"));
  std::mt19937_64 rng_reg(sub_seed(cfg.seed, "reg"));
  std::mt19937_64 rng_replay(sub_seed(cfg.seed, "replay"));
  ReplayBuffer buffer(static_cast<size_t>(cfg.buffer_capacity),
                      cfg.replay_policy, cfg.alpha);

  const int k_b = iterations_to_target(n, cfg.r_b, cfg.target_m);
  const int k_p = iterations_to_target(dims.q, cfg.r_p, cfg.target_qp);
  const int total_k = std::max({k_b, k_p, 1});
  auto count_b = [&](int k) {
    return k >= total_k ? cfg.target_m
                        : std::max(retained_count(n, cfg.r_b, k), cfg.target_m);
  };
  auto count_p = [&](int k) {
    return k >= total_k
               ? cfg.target_qp
               : std::max(retained_count(dims.q, cfg.r_p, k), cfg.target_qp);
  };

  TrainResult res;
  TrainRecord& rec = res.record;
  rec.mask_log.resize(static_cast<size_t>(total_k));
  std::vector<std::uint8_t> prev_b = mask.b;
  std::vector<std::uint8_t> prev_p = mask.p;

  bool have_best = false;
  double best_val = std::numeric_limits<double>::infinity();

  for (int k = 1; k <= total_k; ++k) {
    const int cb = count_b(k);
    const int cp = count_p(k);
    if (cfg.reset_optimizer_each_iteration) opt.reset();
    double iter_loss_sum = 0.0;
    size_t iter_loss_count = 0;
    double iter_best_val = std::numeric_limits<double>::infinity();
    int bad = 0;
    double last_val = 0.0;

    for (int epoch = 0; epoch < cfg.epochs_per_iteration; ++epoch) {
      std::vector<size_t> order = shuffled_indices(data.train.size(), rng_shuffle);
      for (size_t start = 0; start < order.size();
           start += static_cast<size_t>(cfg.batch_size)) {
        const size_t end =
            std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
        const double inv_b = 1.0 / static_cast<double>(end - start);
        mask.b = compute_mask_count(mask.b_hat->v, prev_b, cb, cfg.pinned);
        mask.p = compute_mask_count(mask.p_hat->v, prev_p, cp);
        rec.mask_log[static_cast<size_t>(k - 1)].push_back(mask.b);

        std::vector<double> sample_losses;
        sample_losses.reserve(end - start);
        for (size_t i = start; i < end; ++i) {
          const WindowSample& w = data.train[order[i]];
          Tape tape;
          TensorPtr loss = main_loss(
              tape, forward_vip(tape, w, mask, params, bridge, data.a_norm, opts),
              w.x_out);
          sample_losses.push_back(loss->v[0]);
          iter_loss_sum += loss->v[0];
          ++iter_loss_count;
          tape.backward(tape.scale(loss, inv_b));
        }

        if (!cfg.no_replay && !buffer.empty()) {
          auto rs = buffer.sample_for_replay(rng_replay);
          if (rs) {
            MaskState rmask;
            rmask.b = compute_mask_count(rs->b_hat_snapshot, prev_b, cb,
                                         cfg.pinned);
            rmask.p = compute_mask_count(rs->p_hat_snapshot, prev_p, cp);
            rmask.b_hat = mask.b_hat;
            rmask.p_hat = mask.p_hat;
            rmask.pinned = cfg.pinned;
            Tape tape;
            TensorPtr rl = main_loss(
                tape,
                forward_vip(tape, rs->window, rmask, params, bridge,
                            data.a_norm, opts),
                rs->window.x_out);
            tape.backward(tape.scale(rl, cfg.gamma1));
          }
        }

        if ((!cfg.no_b_reg && cfg.r1_count > 0) ||
            (!cfg.no_p_reg && cfg.r2_count > 0)) {
          Tape tape;
          TensorPtr reg;
          if (!cfg.no_b_reg && cfg.r1_count > 0) {
            std::vector<int> r1 =
                mask_to_indices(random_reg_mask(n, cfg.r1_count, rng_reg));
            reg = tape.scale(tape.l1_norm(tape.gather_axis0(mask.b_hat, r1)),
                             cfg.gamma2);
          }
          if (!cfg.no_p_reg && cfg.r2_count > 0) {
            std::vector<int> r2 =
                mask_to_indices(random_reg_mask(dims.q, cfg.r2_count, rng_reg));
            TensorPtr t = tape.scale(
                tape.l1_norm(tape.gather_axis0(mask.p_hat, r2)), cfg.gamma3);
            reg = reg ? tape.add(reg, t) : t;
          }
          tape.backward(reg);
        }

        opt.step(leaves);

        for (size_t i = start; i < end; ++i) {
          ReplaySample s;
          s.window = data.train[order[i]];
          s.b_hat_snapshot = mask.b_hat->v;
          s.p_hat_snapshot = mask.p_hat->v;
          s.priority =
              replay_priority(sample_losses[i - start], cfg.replay_policy);
          buffer.push(std::move(s));
        }
      }

      MaskState cand = mask;
      cand.b = compute_mask_count(mask.b_hat->v, prev_b, cb, cfg.pinned);
      cand.p = compute_mask_count(mask.p_hat->v, prev_p, cp);
      last_val = validation_mae(data, params, &bridge, &cand, opts);
      if (k == total_k && last_val < best_val) {
        best_val = last_val;
        res.state.params = params.clone();
        res.state.bridge = bridge.clone();
        res.state.mask = cand;
        res.state.mask.b_hat = Tensor::from(mask.b_hat->shape, mask.b_hat->v, true);
        res.state.mask.p_hat = Tensor::from(mask.p_hat->shape, mask.p_hat->v, true);
        have_best = true;
      }
      if (last_val < iter_best_val - 1e-12) {
        iter_best_val = last_val;
        bad = 0;
      } else if (cfg.patience > 0 && ++bad >= cfg.patience) {
        break;
      }
    }

    prev_b = compute_mask_count(mask.b_hat->v, prev_b, cb, cfg.pinned);
    prev_p = compute_mask_count(mask.p_hat->v, prev_p, cp);
    mask.b = prev_b;
    mask.p = prev_p;
    rec.retained_counts.push_back(cb);
    rec.param_counts.push_back(cp);
    rec.iter_train_loss.push_back(iter_loss_sum /
                                  static_cast<double>(iter_loss_count));
    rec.iter_val_mae.push_back(last_val);
  }

  if (!have_best) {
    res.state.params = params;
    res.state.bridge = bridge;
    res.state.mask = mask;
    best_val = validation_mae(data, params, &bridge, &mask, opts);
  }
  res.best_val_mae = best_val;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

}  // namespace vip
