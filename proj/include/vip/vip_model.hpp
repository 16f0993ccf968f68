#pragma once

#include <cstdint>
#include <vector>

#include "vip/model.hpp"
#include "vip/pruning.hpp"

namespace vip {

// Extrapolation parameters. fc is the shared projection applied to both
// sides of the similarity product; extra_map is only used by the
// no-extrapolation ablation, which replaces the bridge with a trainable
// linear map.
struct BridgeParams {
  TensorPtr fc_w, fc_b;  // d_v x d_v, d_v
  TensorPtr extra_map;   // n x n; columns of the selected variables are used

  std::vector<TensorPtr> leaves(bool no_extra) const {
    if (no_extra) return {extra_map};
    return {fc_w, fc_b};
  }
  BridgeParams clone() const;
};

BridgeParams init_bridge(int n, int d_v, std::uint64_t seed);

struct VipOptions {
  bool no_extra = false;       // ablation: MLP map instead of the bridge
  bool bridge_softmax = false; // optional row-softmax on the bridge
};

// Parameter-wise masked attention over the time axis: Q/K use only the
// retained parameter columns, V is full-width gated elementwise by p_hat.
// Heads own their original column blocks; each keeps its surviving columns.
TensorPtr masked_attention(Tape& tape, const TensorPtr& e,
                           const std::vector<std::uint8_t>& p,
                           const TensorPtr& p_hat, const AttnLayer& layer,
                           const ModelDims& dims);

TensorPtr masked_attention_block(Tape& tape, const TensorPtr& e,
                                 const std::vector<std::uint8_t>& p,
                                 const TensorPtr& p_hat,
                                 const AttnLayer& layer, const ModelDims& dims,
                                 bool spatial);

// Aggregated features for the selected variables only (m x l x q).
TensorPtr embed_masked(Tape& tape, const WindowSample& x,
                       const std::vector<int>& selected,
                       const ModelParams& params);

// Similarity bridge B over node embeddings: gelu(FC(E[b]) . FC(E)^T), m x n.
TensorPtr extrapolation_bridge(Tape& tape, const TensorPtr& node_emb,
                               const std::vector<int>& selected,
                               const BridgeParams& bridge,
                               bool row_softmax = false);

// Fused adjacency: b_hat[b] (broadcast over columns) * A_norm[b] + B.
TensorPtr fuse_adjacency(Tape& tape, const TensorPtr& b_hat,
                         const NormalizedAdjacency& a_norm,
                         const std::vector<int>& selected,
                         const TensorPtr& bridge_mat);

// H_full = A_fused^T . H_masked along the variable axis (n x l x q).
TensorPtr propagate(Tape& tape, const TensorPtr& a_fused,
                    const TensorPtr& h_masked);

// Full masked forward: forecasts for all n variables from the m selected
// inputs.
TensorPtr forward_vip(Tape& tape, const WindowSample& x, const MaskState& mask,
                      const ModelParams& params, const BridgeParams& bridge,
                      const NormalizedAdjacency& a_norm,
                      const VipOptions& opts = {});

// Deployed parameter count of the pruned model with m selected variables and
// q' retained attention dimensions.
std::int64_t vip_param_count(const ModelDims& dims, int q_retained);

}  // namespace vip
