#pragma once

#include <optional>
#include <string>

#include "vip/training.hpp"

namespace vip {

struct Checkpoint {
  ModelParams params;
  std::optional<BridgeParams> bridge;
  std::optional<MaskState> mask;
};

// JSON checkpoint; doubles round-trip bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const BridgeParams* bridge = nullptr,
                     const MaskState* mask = nullptr);
Checkpoint load_checkpoint(const std::string& path);

// Selection file: one "index,score" line per chosen variable, sorted by index.
void save_selection(const std::string& path, const std::vector<int>& indices,
                    const std::vector<double>& scores);
std::vector<std::pair<int, double>> load_selection(const std::string& path);

// One JSON object per line, one line per pruning iteration.
void save_record(const std::string& path, const TrainRecord& rec);
TrainRecord load_record(const std::string& path);

}  // namespace vip
