// Copyright 2026 The debugcn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "debugcn/graph.hpp"
#include "debugcn/ops.hpp"
#include "debugcn/tensor.hpp"

namespace debugcn {

/// Disjoint union of k graphs. Node rows are stacked in graph order, each
/// undirected edge appears twice (u->v and v->u) with offset endpoints, and
/// graph_ids maps every node to its graph in 0..k-1.
struct GraphBatch {
  Tensor features;
  std::vector<std::uint32_t> sources;
  std::vector<std::uint32_t> targets;
  std::vector<float> weights;
  std::vector<std::uint32_t> graph_ids;
  std::size_t num_graphs = 0;
  std::vector<int> labels;  // empty when unlabeled
  Adjacency adjacency;      // sources/targets/weights grouped for aggregation

  std::size_t num_nodes() const { return graph_ids.size(); }
};

// Throws InvalidBatchError for empty input, empty graphs or mixed feature
// widths, and ShapeError when labels are given but do not match the count.
GraphBatch make_batch(std::span<const LayerGraph* const> graphs,
                      std::span<const int> labels = {});
GraphBatch make_batch(const LayerGraph& graph, int label = -1);

}  // namespace debugcn
