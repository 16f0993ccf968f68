#include "vip/io.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace vip {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

json tensor_to_json(const TensorPtr& t) {
  return json{{"shape", t->shape}, {"v", t->v}};
}

TensorPtr tensor_from_json(const json& j, bool requires_grad) {
  return Tensor::from(j.at("shape").get<std::vector<int>>(),
                      j.at("v").get<std::vector<double>>(), requires_grad);
}

json layer_to_json(const AttnLayer& l) {
  json j;
  j["w_q"] = tensor_to_json(l.w_q);
  j["w_k"] = tensor_to_json(l.w_k);
  j["w_v"] = tensor_to_json(l.w_v);
  j["ff1_w"] = tensor_to_json(l.ff1_w);
  j["ff1_b"] = tensor_to_json(l.ff1_b);
  j["ff2_w"] = tensor_to_json(l.ff2_w);
  j["ff2_b"] = tensor_to_json(l.ff2_b);
  j["ln1_g"] = tensor_to_json(l.ln1_g);
  j["ln1_b"] = tensor_to_json(l.ln1_b);
  j["ln2_g"] = tensor_to_json(l.ln2_g);
  j["ln2_b"] = tensor_to_json(l.ln2_b);
  return j;
}

AttnLayer layer_from_json(const json& j) {
  AttnLayer l;
  l.w_q = tensor_from_json(j.at("w_q"), true);
  l.w_k = tensor_from_json(j.at("w_k"), true);
  l.w_v = tensor_from_json(j.at("w_v"), true);
  l.ff1_w = tensor_from_json(j.at("ff1_w"), true);
  l.ff1_b = tensor_from_json(j.at("ff1_b"), true);
  l.ff2_w = tensor_from_json(j.at("ff2_w"), true);
  l.ff2_b = tensor_from_json(j.at("ff2_b"), true);
  l.ln1_g = tensor_from_json(j.at("ln1_g"), true);
  l.ln1_b = tensor_from_json(j.at("ln1_b"), true);
  l.ln2_g = tensor_from_json(j.at("ln2_g"), true);
  l.ln2_b = tensor_from_json(j.at("ln2_b"), true);
  return l;
}

json dims_to_json(const ModelDims& d) {
  return json{{"n", d.n},         {"l", d.l},
              {"l_out", d.l_out}, {"q", d.q},
              {"d", d.d},         {"d_tod", d.d_tod},
              {"d_dow", d.d_dow}, {"d_v", d.d_v},
              {"tod_steps", d.tod_steps}, {"dow_steps", d.dow_steps},
              {"layers", d.layers},       {"heads", d.heads},
              {"residual", d.residual}};
}

ModelDims dims_from_json(const json& j) {
  ModelDims d;
  d.n = j.at("n").get<int>();
  d.l = j.at("l").get<int>();
  d.l_out = j.at("l_out").get<int>();
  d.q = j.at("q").get<int>();
  d.d = j.at("d").get<int>();
  d.d_tod = j.at("d_tod").get<int>();
  d.d_dow = j.at("d_dow").get<int>();
  d.d_v = j.at("d_v").get<int>();
  d.tod_steps = j.at("tod_steps").get<int>();
  d.dow_steps = j.at("dow_steps").get<int>();
  d.layers = j.at("layers").get<int>();
  d.heads = j.at("heads").get<int>();
  d.residual = j.at("residual").get<bool>();
  return d;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << text;
  if (!out) throw ParseError("write failed: " + path);
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const BridgeParams* bridge, const MaskState* mask) {
  json j;
  j["version"] = kCheckpointVersion;
  j["dims"] = dims_to_json(params.dims);
  j["input_w"] = tensor_to_json(params.input_w);
  j["input_b"] = tensor_to_json(params.input_b);
  j["tod"] = tensor_to_json(params.tod);
  j["dow"] = tensor_to_json(params.dow);
  j["node"] = tensor_to_json(params.node);
  j["out_w"] = tensor_to_json(params.out_w);
  j["out_b"] = tensor_to_json(params.out_b);
  json layers = json::array();
  for (const AttnLayer& l : params.layers) layers.push_back(layer_to_json(l));
  j["layers"] = layers;
  if (bridge) {
    j["bridge"] = json{{"fc_w", tensor_to_json(bridge->fc_w)},
                       {"fc_b", tensor_to_json(bridge->fc_b)},
                       {"extra_map", tensor_to_json(bridge->extra_map)}};
  }
  if (mask) {
    j["mask"] = json{{"b", mask->b},
                     {"p", mask->p},
                     {"b_hat", tensor_to_json(mask->b_hat)},
                     {"p_hat", tensor_to_json(mask->p_hat)},
                     {"pinned", std::vector<int>(mask->pinned.begin(),
                                                 mask->pinned.end())}};
  }
  write_text(path, j.dump());
}

Checkpoint load_checkpoint(const std::string& path) {
  json j = read_json(path);
  if (!j.contains("version") || j.at("version").get<int>() != kCheckpointVersion)
    throw ParseError(path + ": unsupported checkpoint version");
  Checkpoint c;
  c.params.dims = dims_from_json(j.at("dims"));
  c.params.input_w = tensor_from_json(j.at("input_w"), true);
  c.params.input_b = tensor_from_json(j.at("input_b"), true);
  c.params.tod = tensor_from_json(j.at("tod"), true);
  c.params.dow = tensor_from_json(j.at("dow"), true);
  c.params.node = tensor_from_json(j.at("node"), true);
  c.params.out_w = tensor_from_json(j.at("out_w"), true);
  c.params.out_b = tensor_from_json(j.at("out_b"), true);
  for (const json& l : j.at("layers"))
    c.params.layers.push_back(layer_from_json(l));
  if (j.contains("bridge")) {
    BridgeParams b;
    b.fc_w = tensor_from_json(j.at("bridge").at("fc_w"), true);
    b.fc_b = tensor_from_json(j.at("bridge").at("fc_b"), true);
    b.extra_map = tensor_from_json(j.at("bridge").at("extra_map"), true);
    c.bridge = std::move(b);
  }
  if (j.contains("mask")) {
    MaskState m;
    m.b = j.at("mask").at("b").get<std::vector<std::uint8_t>>();
    m.p = j.at("mask").at("p").get<std::vector<std::uint8_t>>();
    m.b_hat = tensor_from_json(j.at("mask").at("b_hat"), true);
    m.p_hat = tensor_from_json(j.at("mask").at("p_hat"), true);
    for (int i : j.at("mask").at("pinned").get<std::vector<int>>())
      m.pinned.insert(i);
    c.mask = std::move(m);
  }
  return c;
}

void save_selection(const std::string& path, const std::vector<int>& indices,
                    const std::vector<double>& scores) {
  if (indices.size() != scores.size())
    throw ContractError("save_selection: index/score size mismatch");
  std::string out;
  char buf[64];
  for (size_t i = 0; i < indices.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g\n", indices[i], scores[i]);
    out += buf;
  }
  write_text(path, out);
}

std::vector<std::pair<int, double>> load_selection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::vector<std::pair<int, double>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    int idx;
    double score;
    if (std::sscanf(line.c_str(), "%d,%lf", &idx, &score) != 2)
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad line");
    out.emplace_back(idx, score);
  }
  return out;
}

void save_record(const std::string& path, const TrainRecord& rec) {
  std::string out;
  for (size_t k = 0; k < rec.retained_counts.size(); ++k) {
    json j;
    j["iteration"] = k + 1;
    j["retained"] = rec.retained_counts[k];
    j["params_retained"] = rec.param_counts[k];
    j["train_loss"] = rec.iter_train_loss[k];
    j["val_mae"] = rec.iter_val_mae[k];
    j["batch_masks"] = rec.mask_log[k];
    out += j.dump();
    out += '\n';
  }
  json tail;
  tail["wall_seconds"] = rec.wall_seconds;
  out += tail.dump();
  out += '\n';
  write_text(path, out);
}

TrainRecord load_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  TrainRecord rec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("wall_seconds")) {
      rec.wall_seconds = j.at("wall_seconds").get<double>();
      continue;
    }
    rec.retained_counts.push_back(j.at("retained").get<int>());
    rec.param_counts.push_back(j.at("params_retained").get<int>());
    rec.iter_train_loss.push_back(j.at("train_loss").get<double>());
    rec.iter_val_mae.push_back(j.at("val_mae").get<double>());
    rec.mask_log.push_back(
        j.at("batch_masks").get<std::vector<std::vector<std::uint8_t>>>());
  }
  return rec;
}

}  // namespace vip
