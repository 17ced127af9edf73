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

#include "debugcn/batch.hpp"

#include <string>

#include "debugcn/error.hpp"

namespace debugcn {

GraphBatch make_batch(std::span<const LayerGraph* const> graphs, std::span<const int> labels) {
  if (graphs.empty()) throw InvalidBatchError("batch: no graphs");
  if (!labels.empty() && labels.size() != graphs.size()) {
    throw ShapeError("batch: " + std::to_string(graphs.size()) + " graphs but " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t d = graphs.front()->feature_width();
  std::size_t total_nodes = 0, total_edges = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const LayerGraph& g = *graphs[i];
    if (g.num_nodes == 0) {
      throw InvalidBatchError("batch: graph " + std::to_string(i) + " has no nodes");
    }
    if (g.feature_width() != d) {
      throw InvalidBatchError("batch: graph " + std::to_string(i) + " has feature width " +
                              std::to_string(g.feature_width()) + ", expected " +
                              std::to_string(d));
    }
    total_nodes += g.num_nodes;
    total_edges += g.edges.size();
  }

  GraphBatch b;
  b.num_graphs = graphs.size();
  b.labels.assign(labels.begin(), labels.end());
  std::vector<float> features;
  features.reserve(total_nodes * d);
  b.graph_ids.reserve(total_nodes);
  b.sources.reserve(2 * total_edges);
  b.targets.reserve(2 * total_edges);
  b.weights.reserve(2 * total_edges);
  std::uint32_t offset = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const LayerGraph& g = *graphs[i];
    auto f = g.node_features.values();
    features.insert(features.end(), f.begin(), f.end());
    b.graph_ids.insert(b.graph_ids.end(), g.num_nodes, static_cast<std::uint32_t>(i));
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const std::uint32_t u = g.edges[e].u + offset, v = g.edges[e].v + offset;
      const float w = g.edge_weights[e];
      b.sources.push_back(u);
      b.targets.push_back(v);
      b.weights.push_back(w);
      b.sources.push_back(v);
      b.targets.push_back(u);
      b.weights.push_back(w);
    }
    offset += static_cast<std::uint32_t>(g.num_nodes);
  }
  b.features = Tensor::matrix(total_nodes, d, std::move(features));
  b.adjacency = Adjacency::build(b.sources, b.targets, b.weights, total_nodes);
  return b;
}

GraphBatch make_batch(const LayerGraph& graph, int label) {
  const LayerGraph* one[] = {&graph};
  if (label < 0) return make_batch(one);
  const int labels[] = {label};
  return make_batch(one, labels);
}

}  // namespace debugcn
