#include "vip/vip_model.hpp"

#include <cmath>
#include <random>

namespace vip {

BridgeParams BridgeParams::clone() const {
  auto copy_tensor = [](const TensorPtr& t) {
    return Tensor::from(t->shape, t->v, t->requires_grad);
  };
  BridgeParams out;
  out.fc_w = copy_tensor(fc_w);
  out.fc_b = copy_tensor(fc_b);
  out.extra_map = copy_tensor(extra_map);
  return out;
}

BridgeParams init_bridge(int n, int d_v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_v));
  std::uniform_real_distribution<double> unif(-bound, bound);
  BridgeParams b;
  std::vector<double> w(static_cast<size_t>(d_v) * d_v);
  for (double& x : w) x = unif(rng);
  b.fc_w = Tensor::from({d_v, d_v}, std::move(w), true);
  b.fc_b = Tensor::zeros({d_v}, true);
  const double mbound = 1.0 / std::sqrt(static_cast<double>(n));
  std::uniform_real_distribution<double> munif(-mbound, mbound);
  std::vector<double> m(static_cast<size_t>(n) * n);
  for (double& x : m) x = munif(rng);
  b.extra_map = Tensor::from({n, n}, std::move(m), true);
  return b;
}

TensorPtr masked_attention(Tape& tape, const TensorPtr& e,
                           const std::vector<std::uint8_t>& p,
                           const TensorPtr& p_hat, const AttnLayer& layer,
                           const ModelDims& dims) {
  if (static_cast<int>(p.size()) != dims.q || p_hat->size() != dims.q)
    throw ContractError("masked_attention: p/p_hat must have length q");
  int live = 0;
  for (auto x : p) live += x;
  if (live < 1) throw ContractError("masked_attention: empty parameter mask");

  const int rows = e->dim(0), steps = e->dim(1);
  auto flat = tape.reshape(e, {rows * steps, dims.q});
  auto v = tape.reshape(
      tape.mul_vec_lastdim(tape.matmul(flat, layer.w_v), p_hat),
      {rows, steps, dims.q});

  const int dh = dims.head_dim();
  std::vector<TensorPtr> heads;
  heads.reserve(static_cast<size_t>(dims.heads));
  for (int h = 0; h < dims.heads; ++h) {
    std::vector<int> kept;
    for (int j = h * dh; j < (h + 1) * dh; ++j)
      if (p[static_cast<size_t>(j)]) kept.push_back(j);
    auto vh = tape.slice_lastdim(v, h * dh, dh);
    if (kept.empty()) {
      // All score columns pruned: softmax of a zero matrix is uniform.
      auto zero = Tensor::zeros({rows, steps, steps});
      heads.push_back(tape.bmm(tape.softmax_lastdim(zero), vh));
      continue;
    }
    auto qh = tape.reshape(tape.matmul(flat, tape.gather_cols(layer.w_q, kept)),
                           {rows, steps, static_cast<int>(kept.size())});
    auto kh = tape.reshape(tape.matmul(flat, tape.gather_cols(layer.w_k, kept)),
                           {rows, steps, static_cast<int>(kept.size())});
    auto scores = tape.scale(tape.bmm(qh, tape.permute(kh, {0, 2, 1})),
                             1.0 / std::sqrt(static_cast<double>(dh)));
    heads.push_back(tape.bmm(tape.softmax_lastdim(scores), vh));
  }
  return tape.concat_lastdim(heads);
}

TensorPtr masked_attention_block(Tape& tape, const TensorPtr& e,
                                 const std::vector<std::uint8_t>& p,
                                 const TensorPtr& p_hat,
                                 const AttnLayer& layer, const ModelDims& dims,
                                 bool spatial) {
  TensorPtr attn;
  if (spatial) {
    auto swapped = tape.permute(e, {1, 0, 2});
    attn = tape.permute(masked_attention(tape, swapped, p, p_hat, layer, dims),
                        {1, 0, 2});
  } else {
    attn = masked_attention(tape, e, p, p_hat, layer, dims);
  }
  if (!dims.residual) return attn;

  auto h = tape.layer_norm_lastdim(tape.add(e, attn), layer.ln1_g, layer.ln1_b);
  const int rows = h->dim(0), steps = h->dim(1);
  auto flat = tape.reshape(h, {rows * steps, dims.q});
  auto ff = tape.add_vec_lastdim(
      tape.matmul(tape.gelu(tape.add_vec_lastdim(tape.matmul(flat, layer.ff1_w),
                                                 layer.ff1_b)),
                  layer.ff2_w),
      layer.ff2_b);
  auto ff3 = tape.reshape(ff, {rows, steps, dims.q});
  return tape.layer_norm_lastdim(tape.add(h, ff3), layer.ln2_g, layer.ln2_b);
}

TensorPtr embed_masked(Tape& tape, const WindowSample& x,
                       const std::vector<int>& selected,
                       const ModelParams& params) {
  const ModelDims& dims = params.dims;
  const int m = static_cast<int>(selected.size());
  std::vector<double> xin(static_cast<size_t>(m) * dims.l);
  for (int r = 0; r < m; ++r)
    for (int t = 0; t < dims.l; ++t)
      xin[static_cast<size_t>(r) * dims.l + t] =
          x.x_in[static_cast<size_t>(selected[static_cast<size_t>(r)]) * dims.l + t];
  auto xt = Tensor::from({m, dims.l}, std::move(xin));
  auto ef = tape.reshape(
      tape.add_vec_lastdim(tape.matmul(xt, params.input_w), params.input_b),
      {m, dims.l, dims.d});
  auto enode =
      tape.broadcast_axis1(tape.gather_axis0(params.node, selected), dims.l);
  auto etod =
      tape.broadcast_axis0(tape.gather_axis0(params.tod, x.tod_index), m);
  auto edow =
      tape.broadcast_axis0(tape.gather_axis0(params.dow, x.dow_index), m);
  return tape.concat_lastdim({ef, enode, etod, edow});
}

TensorPtr extrapolation_bridge(Tape& tape, const TensorPtr& node_emb,
                               const std::vector<int>& selected,
                               const BridgeParams& bridge, bool row_softmax) {
  if (selected.empty())
    throw ContractError("extrapolation_bridge: no selected variables");
  auto fc_all = tape.add_vec_lastdim(tape.matmul(node_emb, bridge.fc_w),
                                     bridge.fc_b);  // n x d_v
  auto fc_sel = tape.gather_axis0(fc_all, selected);
  auto b = tape.gelu(tape.matmul(fc_sel, tape.transpose2d(fc_all)));
  if (row_softmax) b = tape.softmax_lastdim(b);
  return b;
}

TensorPtr fuse_adjacency(Tape& tape, const TensorPtr& b_hat,
                         const NormalizedAdjacency& a_norm,
                         const std::vector<int>& selected,
                         const TensorPtr& bridge_mat) {
  const int m = static_cast<int>(selected.size());
  if (bridge_mat->ndim() != 2 || bridge_mat->dim(0) != m ||
      bridge_mat->dim(1) != a_norm.n)
    throw ContractError("fuse_adjacency: bridge must be m x n");
  auto a_const = Tensor::from({a_norm.n, a_norm.n}, a_norm.a);
  auto a_sel = tape.gather_axis0(a_const, selected);     // m x n, constant
  auto b_sel = tape.gather_axis0(b_hat, selected);       // m
  return tape.add(tape.mul_vec_axis0(a_sel, b_sel), bridge_mat);
}

TensorPtr propagate(Tape& tape, const TensorPtr& a_fused,
                    const TensorPtr& h_masked) {
  if (a_fused->ndim() != 2 || h_masked->ndim() != 3 ||
      a_fused->dim(0) != h_masked->dim(0))
    throw ContractError("propagate: shape mismatch");
  const int n = a_fused->dim(1);
  const int l = h_masked->dim(1), q = h_masked->dim(2);
  auto h2 = tape.reshape(h_masked, {h_masked->dim(0), l * q});
  return tape.reshape(tape.matmul(tape.transpose2d(a_fused), h2), {n, l, q});
}

TensorPtr forward_vip(Tape& tape, const WindowSample& x, const MaskState& mask,
                      const ModelParams& params, const BridgeParams& bridge,
                      const NormalizedAdjacency& a_norm,
                      const VipOptions& opts) {
  const ModelDims& dims = params.dims;
  const auto selected = mask.selected_indices();
  if (selected.empty()) throw ContractError("forward_vip: empty variable mask");

  auto run = [](const char* stage, auto&& fn) {
    try {
      return fn();
    } catch (const NumericError& e) {
      throw NumericError(std::string(stage) + ": " + e.what());
    }
  };

  auto h = run("embed", [&] { return embed_masked(tape, x, selected, params); });
  const int lt = dims.temporal_layers();
  for (int i = 0; i < dims.layers; ++i) {
    const bool spatial = i >= lt;
    h = run(spatial ? "masked_spatial_attention" : "masked_temporal_attention",
            [&] {
              return masked_attention_block(
                  tape, h, mask.p, mask.p_hat,
                  params.layers[static_cast<size_t>(i)], dims, spatial);
            });
  }

  TensorPtr h_full;
  if (opts.no_extra) {
    h_full = run("extra_mlp", [&] {
      const int m = static_cast<int>(selected.size());
      auto map = tape.gather_cols(bridge.extra_map, selected);  // n x m
      auto h2 = tape.reshape(h, {m, dims.l * dims.q});
      return tape.reshape(tape.matmul(map, h2), {a_norm.n, dims.l, dims.q});
    });
  } else {
    h_full = run("extrapolation", [&] {
      auto b = extrapolation_bridge(tape, params.node, selected, bridge,
                                    opts.bridge_softmax);
      auto fused = fuse_adjacency(tape, mask.b_hat, a_norm, selected, b);
      return propagate(tape, fused, h);
    });
  }
  return run("output_mlp", [&] { return output_mlp(tape, h_full, params); });
}

std::int64_t vip_param_count(const ModelDims& dims, int q_retained) {
  std::int64_t total = 0;
  total += static_cast<std::int64_t>(dims.l) * dims.l * dims.d + dims.l * dims.d;
  total += static_cast<std::int64_t>(dims.tod_steps) * dims.d_tod;
  total += static_cast<std::int64_t>(dims.dow_steps) * dims.d_dow;
  total += static_cast<std::int64_t>(dims.n) * dims.d_v;
  // Q/K keep only the retained columns; V stays full-width (gated by p_hat).
  std::int64_t per_layer =
      2ll * dims.q * q_retained + static_cast<std::int64_t>(dims.q) * dims.q;
  if (dims.residual)
    per_layer += 2ll * dims.q * dims.q + 2ll * dims.q + 4ll * dims.q;
  total += dims.layers * per_layer;
  total += static_cast<std::int64_t>(dims.d_v) * dims.d_v + dims.d_v;  // bridge
  total += dims.n + dims.q;  // b_hat, p_hat
  total += static_cast<std::int64_t>(dims.l) * dims.q * dims.l_out + dims.l_out;
  return total;
}

}  // namespace vip
