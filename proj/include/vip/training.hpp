#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vip/metrics.hpp"
#include "vip/replay.hpp"
#include "vip/vip_model.hpp"

namespace vip {

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Leaves must be passed in a stable order across calls.
  void step(const std::vector<TensorPtr>& leaves);
  void reset();

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Normalized dataset ready for training: windows built per split, z-score
// statistics fitted on the training split only.
struct Dataset {
  int n = 0, l = 12, l_out = 12;
  NormStats stats;
  AdjacencyMatrix adjacency;
  NormalizedAdjacency a_norm;
  std::vector<WindowSample> train, val, test;
};

Dataset prepare_dataset(const RawSeries& series, const AdjacencyMatrix& adj,
                        double r_train, double r_val, double r_test, int l,
                        int l_out, int stride);

// Mean absolute error between a forecast tensor and a flat target.
TensorPtr main_loss(Tape& tape, const TensorPtr& pred,
                    const std::vector<double>& target);

// Combined training loss; replay may be null (contributes 0). r1/r2 are the
// index sets of the regularizer masks.
TensorPtr sum_loss(Tape& tape, const TensorPtr& main, const TensorPtr& replay,
                   const TensorPtr& b_hat, const TensorPtr& p_hat,
                   const std::vector<int>& r1, const std::vector<int>& r2,
                   double gamma1, double gamma2, double gamma3);

struct PretrainConfig {
  double lr = 1e-3;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  ModelParams params;  // best-validation snapshot
  double best_val_mae = 0.0;
  int epochs_run = 0;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_val_mae;
};

PretrainResult pretrain(const Dataset& data, const ModelDims& dims,
                        const PretrainConfig& cfg);

struct TrainingConfig {
  double r_b = 0.10;
  double r_p = 0.05;
  double gamma1 = 1.0, gamma2 = 1.0, gamma3 = 1.0;
  int r1_count = 2, r2_count = 1;
  double alpha = 0.6;
  int buffer_capacity = 288 * 7;
  double lr = 1e-3;
  int batch_size = 64;
  int epochs_per_iteration = 5;
  int patience = 2;  // early exit on validation plateau within an iteration
  int target_m = 0;
  int target_qp = 0;
  bool pretrained = true;
  bool no_extra = false, no_b_reg = false, no_p_reg = false, no_replay = false;
  bool bridge_softmax = false;
  bool reset_optimizer_each_iteration = false;
  ReplayPolicy replay_policy = ReplayPolicy::PVR;
  std::set<int> pinned;
  std::uint64_t seed = 0;
};

struct TrainRecord {
  std::vector<int> retained_counts;  // finalized |b^k| per iteration
  std::vector<int> param_counts;     // finalized |p^k| per iteration
  std::vector<std::vector<std::vector<std::uint8_t>>> mask_log;  // per-batch b
  std::vector<double> iter_train_loss;
  std::vector<double> iter_val_mae;
  double wall_seconds = 0.0;
};

struct VipState {
  ModelParams params;
  BridgeParams bridge;
  MaskState mask;
};

struct TrainResult {
  VipState state;
  TrainRecord record;
  double best_val_mae = 0.0;
};

// The full outer schedule: k = 1 .. iterations_to_target, final clamp to
// exactly target_m variables and target_qp attention dimensions.
TrainResult train_vip(const Dataset& data, const ModelDims& dims,
                      const TrainingConfig& cfg,
                      const ModelParams* pretrained_params = nullptr);

// Forecasts (inverse-normalized) for every window; pass a null mask/bridge to
// evaluate the base model.
HorizonMetrics evaluate_forecasts(const Dataset& data,
                                  const std::vector<WindowSample>& windows,
                                  const ModelParams& params,
                                  const BridgeParams* bridge,
                                  const MaskState* mask,
                                  const VipOptions& opts = {},
                                  double mape_eps = 1.0);

// Normalized-unit validation MAE, the selection objective during training.
double validation_mae(const Dataset& data, const ModelParams& params,
                      const BridgeParams* bridge, const MaskState* mask,
                      const VipOptions& opts = {});

}  // namespace vip
