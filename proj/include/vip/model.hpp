#pragma once

#include <cstdint>
#include <vector>

#include "vip/data.hpp"
#include "vip/tensor.hpp"

namespace vip {

struct ModelDims {
  int n = 0;
  int l = 12;
  int l_out = 12;
  int q = 152;
  int d = 24;
  int d_tod = 24;
  int d_dow = 24;
  int d_v = 80;
  int tod_steps = 288;  // D
  int dow_steps = 7;    // W
  int layers = 6;       // split ceil(L/2) temporal + floor(L/2) spatial
  int heads = 4;
  bool residual = true;  // residual + layer norm + feed-forward per block

  int temporal_layers() const { return (layers + 1) / 2; }
  void validate() const;
  int head_dim() const { return q / heads; }
};

struct AttnLayer {
  TensorPtr w_q, w_k, w_v;          // q x q
  TensorPtr ff1_w, ff1_b, ff2_w, ff2_b;  // feed-forward, q -> q -> q
  TensorPtr ln1_g, ln1_b, ln2_g, ln2_b;  // layer norms
};

struct ModelParams {
  ModelDims dims;
  TensorPtr input_w, input_b;  // l -> l*d per variable
  TensorPtr tod, dow, node;    // D x d_tod, W x d_dow, n x d_v
  std::vector<AttnLayer> layers;
  TensorPtr out_w, out_b;  // (l*q) -> l_out per variable

  std::vector<TensorPtr> leaves() const;
  ModelParams clone() const;  // deep copy of values (fresh grads)
};

ModelParams init_params(int n, const ModelDims& dims, std::uint64_t seed);

// Aggregated features E_all = E_f || E_node || E_tod || E_dow, shape n x l x q.
TensorPtr embed(Tape& tape, const WindowSample& x, const ModelParams& params);

// Multi-head attention over the l time positions, per variable.
TensorPtr temporal_attention(Tape& tape, const TensorPtr& e,
                             const AttnLayer& layer, const ModelDims& dims);
// Attention over the n variables, per time step: temporal attention on the
// axis-swapped input.
TensorPtr spatial_attention(Tape& tape, const TensorPtr& e,
                            const AttnLayer& layer, const ModelDims& dims);

// One encoder block: attention, then (optionally) residual + layer norm and
// a feed-forward sublayer.
TensorPtr attention_block(Tape& tape, const TensorPtr& e,
                          const AttnLayer& layer, const ModelDims& dims,
                          bool spatial);

// Full base model: embed -> temporal stack -> spatial stack -> output MLP.
TensorPtr forward_stmf(Tape& tape, const WindowSample& x,
                       const ModelParams& params);

// Output MLP, shared by the base and masked forward paths.
TensorPtr output_mlp(Tape& tape, const TensorPtr& h, const ModelParams& params);

// Deployed parameter count of the base model.
std::int64_t stmf_param_count(const ModelDims& dims);

}  // namespace vip
