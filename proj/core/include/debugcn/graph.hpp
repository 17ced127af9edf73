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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "debugcn/features.hpp"
#include "debugcn/tensor.hpp"

namespace debugcn {

enum class GraphKind { fc_bipartite, conv_flat, conv_2d };

std::string_view graph_kind_name(GraphKind kind);

struct Edge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected, edge-weighted graph with one feature row per node.
///
/// For fc_bipartite graphs nodes [0, left_nodes) are the layer's inputs and
/// the rest its outputs; left_nodes is 0 for convolution graphs.
struct LayerGraph {
  GraphKind kind = GraphKind::fc_bipartite;
  std::size_t num_nodes = 0;
  std::size_t left_nodes = 0;
  Tensor node_features;  // [num_nodes x d]
  std::vector<Edge> edges;
  std::vector<float> edge_weights;

  std::size_t feature_width() const { return node_features.cols(); }
};

// Throws ValidationError: self-loops, duplicate edges, endpoints out of
// range, non-finite weights, feature row count mismatch.
void validate_graph(const LayerGraph& graph);

std::vector<std::size_t> degrees(const LayerGraph& graph);

/// Complete bipartite graph of an [r x c] weight matrix: left node j is
/// input j, right node c+i is output i, and edge (j, c+i) carries
/// fc_weight[i][j]. Edges are listed in row-major order of fc_weight.
LayerGraph build_fc_bipartite(const Tensor& fc_weight, const FeatureConfig& config);

/// One node per output filter, features are the filter's weights in storage
/// order, consecutive filters chained by unit-weight edges.
LayerGraph build_conv_flat(const Tensor& conv);

/// One node per weight cell (feature = the weight). Each (f_out, f_in) slice
/// is a 4-connected H x W grid; consecutive slices are chained through their
/// (H/2, W/2) cells. All edges have unit weight.
LayerGraph build_conv_2d(const Tensor& conv);

/// Relabels node i as new_index[i]. For fc graphs the map must keep every
/// node on its side. Throws ValidationError for non-bijective maps.
LayerGraph permute_nodes(const LayerGraph& graph, std::span<const std::uint32_t> new_index);

/// Composes `swaps` random transpositions (left side only for fc graphs) and
/// applies the result with permute_nodes.
std::vector<std::uint32_t> random_swap_permutation(const LayerGraph& graph,
                                                   std::size_t swaps, std::uint64_t seed);
LayerGraph random_pair_swaps(const LayerGraph& graph, std::size_t swaps, std::uint64_t seed);

// {"num_nodes", "kind", "feature_width", "features" (row-major), "edges": [[u,v,w],...]}
std::string graph_to_json(const LayerGraph& graph);

}  // namespace debugcn
