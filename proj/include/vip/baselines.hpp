#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "vip/data.hpp"

namespace vip {

struct SelectionResult {
  std::vector<int> indices;  // sorted, exactly m distinct entries
  std::string method;
  std::vector<double> scores;  // per-variable score used, when applicable
};

// Top-m by time-averaged raw value; ties broken toward the lowest index.
SelectionResult select_max_value(const RawSeries& series, int m);

// Top-m by unweighted node degree.
SelectionResult select_max_connectivity(const AdjacencyMatrix& a, int m);

// ceil(sqrt(m))^2 grid over the coordinate bounding box; highest-degree node
// per non-empty cell, trimmed or filled globally by degree.
SelectionResult select_grid(const std::vector<std::pair<double, double>>& coords,
                            const AdjacencyMatrix& a, int m);

// Uniform m-subset.
SelectionResult select_random(int n, int m, std::uint64_t seed);

// Pinned set for the hybrid mode: the first stage fixes ceil(m/2) variables,
// the pruning run fills the remainder.
std::set<int> hybrid_pin(const SelectionResult& first_stage, int m);

// "index,x,y" CSV.
std::vector<std::pair<double, double>> load_coords(const std::string& path,
                                                   int n);

}  // namespace vip
