#include "vip/model.hpp"

#include <cmath>
#include <random>

namespace vip {

void ModelDims::validate() const {
  if (n < 1 || l < 1 || l_out < 1 || layers < 1 || heads < 1)
    throw ConfigError("ModelDims: n, l, l', L, heads must be >= 1");
  if (d + d_tod + d_dow + d_v != q)
    throw ConfigError("ModelDims: d + d_tod + d_dow + d_v must equal q");
  if (q % heads != 0)
    throw ConfigError("ModelDims: heads must divide q");
  if (tod_steps < 1 || dow_steps < 1)
    throw ConfigError("ModelDims: embedding table sizes must be >= 1");
}

std::vector<TensorPtr> ModelParams::leaves() const {
  std::vector<TensorPtr> out = {input_w, input_b, tod, dow, node};
  for (const auto& layer : layers) {
    out.push_back(layer.w_q);
    out.push_back(layer.w_k);
    out.push_back(layer.w_v);
    if (dims.residual) {
      out.push_back(layer.ff1_w);
      out.push_back(layer.ff1_b);
      out.push_back(layer.ff2_w);
      out.push_back(layer.ff2_b);
      out.push_back(layer.ln1_g);
      out.push_back(layer.ln1_b);
      out.push_back(layer.ln2_g);
      out.push_back(layer.ln2_b);
    }
  }
  out.push_back(out_w);
  out.push_back(out_b);
  return out;
}

ModelParams ModelParams::clone() const {
  auto copy_tensor = [](const TensorPtr& t) {
    return Tensor::from(t->shape, t->v, t->requires_grad);
  };
  ModelParams out;
  out.dims = dims;
  out.input_w = copy_tensor(input_w);
  out.input_b = copy_tensor(input_b);
  out.tod = copy_tensor(tod);
  out.dow = copy_tensor(dow);
  out.node = copy_tensor(node);
  for (const auto& layer : layers) {
    AttnLayer l;
    l.w_q = copy_tensor(layer.w_q);
    l.w_k = copy_tensor(layer.w_k);
    l.w_v = copy_tensor(layer.w_v);
    l.ff1_w = copy_tensor(layer.ff1_w);
    l.ff1_b = copy_tensor(layer.ff1_b);
    l.ff2_w = copy_tensor(layer.ff2_w);
    l.ff2_b = copy_tensor(layer.ff2_b);
    l.ln1_g = copy_tensor(layer.ln1_g);
    l.ln1_b = copy_tensor(layer.ln1_b);
    l.ln2_g = copy_tensor(layer.ln2_g);
    l.ln2_b = copy_tensor(layer.ln2_b);
    out.layers.push_back(std::move(l));
  }
  out.out_w = copy_tensor(out_w);
  out.out_b = copy_tensor(out_b);
  return out;
}

namespace {

TensorPtr uniform_init(std::vector<int> shape, int fan_in,
                       std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> unif(-bound, bound);
  std::int64_t sz = 1;
  for (int d : shape) sz *= d;
  std::vector<double> v(static_cast<size_t>(sz));
  for (double& x : v) x = unif(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

ModelParams init_params(int n, const ModelDims& dims_in, std::uint64_t seed) {
  ModelDims dims = dims_in;
  dims.n = n;
  dims.validate();
  std::mt19937_64 rng(seed);

  ModelParams p;
  p.dims = dims;
  p.input_w = uniform_init({dims.l, dims.l * dims.d}, dims.l, rng);
  p.input_b = Tensor::zeros({dims.l * dims.d}, true);
  p.tod = uniform_init({dims.tod_steps, dims.d_tod}, dims.d_tod, rng);
  p.dow = uniform_init({dims.dow_steps, dims.d_dow}, dims.d_dow, rng);
  p.node = uniform_init({n, dims.d_v}, dims.d_v, rng);
  for (int i = 0; i < dims.layers; ++i) {
    AttnLayer layer;
    layer.w_q = uniform_init({dims.q, dims.q}, dims.q, rng);
    layer.w_k = uniform_init({dims.q, dims.q}, dims.q, rng);
    layer.w_v = uniform_init({dims.q, dims.q}, dims.q, rng);
    layer.ff1_w = uniform_init({dims.q, dims.q}, dims.q, rng);
    layer.ff1_b = Tensor::zeros({dims.q}, true);
    layer.ff2_w = uniform_init({dims.q, dims.q}, dims.q, rng);
    layer.ff2_b = Tensor::zeros({dims.q}, true);
    layer.ln1_g = Tensor::full({dims.q}, 1.0, true);
    layer.ln1_b = Tensor::zeros({dims.q}, true);
    layer.ln2_g = Tensor::full({dims.q}, 1.0, true);
    layer.ln2_b = Tensor::zeros({dims.q}, true);
    p.layers.push_back(std::move(layer));
  }
  p.out_w = uniform_init({dims.l * dims.q, dims.l_out}, dims.l * dims.q, rng);
  p.out_b = Tensor::zeros({dims.l_out}, true);
  return p;
}

TensorPtr embed(Tape& tape, const WindowSample& x, const ModelParams& params) {
  const ModelDims& dims = params.dims;
  const int rows = static_cast<int>(x.x_in.size()) / dims.l;
  for (int idx : x.tod_index)
    if (idx < 0 || idx >= dims.tod_steps)
      throw ContractError("embed: time-of-day index out of range");
  for (int idx : x.dow_index)
    if (idx < 0 || idx >= dims.dow_steps)
      throw ContractError("embed: day-of-week index out of range");

  auto xin = Tensor::from({rows, dims.l}, x.x_in);
  auto ef = tape.reshape(
      tape.add_vec_lastdim(tape.matmul(xin, params.input_w), params.input_b),
      {rows, dims.l, dims.d});
  auto enode = tape.broadcast_axis1(params.node, dims.l);  // n x l x d_v
  auto etod = tape.broadcast_axis0(tape.gather_axis0(params.tod, x.tod_index),
                                   rows);  // n x l x d_tod
  auto edow = tape.broadcast_axis0(tape.gather_axis0(params.dow, x.dow_index),
                                   rows);
  return tape.concat_lastdim({ef, enode, etod, edow});
}

TensorPtr temporal_attention(Tape& tape, const TensorPtr& e,
                             const AttnLayer& layer, const ModelDims& dims) {
  const int rows = e->dim(0), steps = e->dim(1);
  auto flat = tape.reshape(e, {rows * steps, dims.q});
  auto q = tape.reshape(tape.matmul(flat, layer.w_q), {rows, steps, dims.q});
  auto k = tape.reshape(tape.matmul(flat, layer.w_k), {rows, steps, dims.q});
  auto v = tape.reshape(tape.matmul(flat, layer.w_v), {rows, steps, dims.q});

  const int dh = dims.head_dim();
  std::vector<TensorPtr> heads;
  heads.reserve(static_cast<size_t>(dims.heads));
  for (int h = 0; h < dims.heads; ++h) {
    auto qh = tape.slice_lastdim(q, h * dh, dh);
    auto kh = tape.slice_lastdim(k, h * dh, dh);
    auto vh = tape.slice_lastdim(v, h * dh, dh);
    auto scores = tape.scale(tape.bmm(qh, tape.permute(kh, {0, 2, 1})),
                             1.0 / std::sqrt(static_cast<double>(dh)));
    heads.push_back(tape.bmm(tape.softmax_lastdim(scores), vh));
  }
  return tape.concat_lastdim(heads);
}

TensorPtr spatial_attention(Tape& tape, const TensorPtr& e,
                            const AttnLayer& layer, const ModelDims& dims) {
  auto swapped = tape.permute(e, {1, 0, 2});
  auto h = temporal_attention(tape, swapped, layer, dims);
  return tape.permute(h, {1, 0, 2});
}

TensorPtr attention_block(Tape& tape, const TensorPtr& e,
                          const AttnLayer& layer, const ModelDims& dims,
                          bool spatial) {
  auto attn = spatial ? spatial_attention(tape, e, layer, dims)
                      : temporal_attention(tape, e, layer, dims);
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

TensorPtr output_mlp(Tape& tape, const TensorPtr& h,
                     const ModelParams& params) {
  const ModelDims& dims = params.dims;
  const int rows = h->dim(0);
  auto flat = tape.reshape(h, {rows, dims.l * dims.q});
  return tape.add_vec_lastdim(tape.matmul(flat, params.out_w), params.out_b);
}

TensorPtr forward_stmf(Tape& tape, const WindowSample& x,
                       const ModelParams& params) {
  const ModelDims& dims = params.dims;
  auto run = [](const char* stage, auto&& fn) {
    try {
      return fn();
    } catch (const NumericError& e) {
      throw NumericError(std::string(stage) + ": " + e.what());
    }
  };
  auto h = run("embed", [&] { return embed(tape, x, params); });
  const int lt = dims.temporal_layers();
  for (int i = 0; i < dims.layers; ++i) {
    const bool spatial = i >= lt;
    h = run(spatial ? "spatial_attention" : "temporal_attention", [&] {
      return attention_block(tape, h, params.layers[static_cast<size_t>(i)],
                             dims, spatial);
    });
  }
  return run("output_mlp", [&] { return output_mlp(tape, h, params); });
}

std::int64_t stmf_param_count(const ModelDims& dims) {
  std::int64_t total = 0;
  total += static_cast<std::int64_t>(dims.l) * dims.l * dims.d + dims.l * dims.d;
  total += static_cast<std::int64_t>(dims.tod_steps) * dims.d_tod;
  total += static_cast<std::int64_t>(dims.dow_steps) * dims.d_dow;
  total += static_cast<std::int64_t>(dims.n) * dims.d_v;
  std::int64_t per_layer = 3ll * dims.q * dims.q;
  if (dims.residual)
    per_layer += 2ll * dims.q * dims.q + 2ll * dims.q + 4ll * dims.q;
  total += dims.layers * per_layer;
  total += static_cast<std::int64_t>(dims.l) * dims.q * dims.l_out + dims.l_out;
  return total;
}

}  // namespace vip
