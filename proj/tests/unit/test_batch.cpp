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

#include <gtest/gtest.h>

#include "debugcn/batch.hpp"
#include "debugcn/error.hpp"
#include "debugcn/graph.hpp"

namespace debugcn {
namespace {

TEST(Batch, StacksNodesAndOffsetsEdgesInBothDirections) {
  const LayerGraph a = build_conv_flat(Tensor({2, 1, 1, 1}, {1, 2}));
  const LayerGraph b = build_conv_flat(Tensor({3, 1, 1, 1}, {3, 4, 5}));
  const LayerGraph* gs[] = {&a, &b};
  const int labels[] = {1, 0};
  const GraphBatch batch = make_batch(gs, labels);
  EXPECT_EQ(batch.num_graphs, 2u);
  EXPECT_EQ(batch.num_nodes(), 5u);
  EXPECT_EQ(batch.graph_ids, (std::vector<std::uint32_t>{0, 0, 1, 1, 1}));
  EXPECT_EQ(std::vector<float>(batch.features.values().begin(), batch.features.values().end()),
            (std::vector<float>{1, 2, 3, 4, 5}));
  EXPECT_EQ(batch.sources, (std::vector<std::uint32_t>{0, 1, 2, 3, 3, 4}));
  EXPECT_EQ(batch.targets, (std::vector<std::uint32_t>{1, 0, 3, 2, 4, 3}));
  EXPECT_EQ(batch.labels, (std::vector<int>{1, 0}));
}

TEST(Batch, AdjacencyGroupsEdgesByTargetAndSource) {
  const LayerGraph g = build_fc_bipartite(Tensor::matrix(2, 2, {1, 2, 3, 4}), FeatureConfig::of(FeatureSet::gcn5));
  const GraphBatch b = make_batch(g, 1);
  const Adjacency& adj = b.adjacency;
  EXPECT_EQ(adj.num_nodes, 4u);
  EXPECT_EQ(adj.num_edges(), 8u);
  EXPECT_EQ(adj.in_offsets, (std::vector<std::uint32_t>{0, 2, 4, 6, 8}));
  // node 2 (output 0) receives from inputs 0 and 1 with row 0 weights
  EXPECT_EQ(std::vector<std::uint32_t>(adj.in_sources.begin() + 4, adj.in_sources.begin() + 6),
            (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(std::vector<float>(adj.in_weights.begin() + 4, adj.in_weights.begin() + 6),
            (std::vector<float>{1, 2}));
  EXPECT_EQ(adj.out_offsets, adj.in_offsets);
  EXPECT_EQ(std::vector<std::uint32_t>(adj.out_targets.begin(), adj.out_targets.begin() + 2),
            (std::vector<std::uint32_t>{2, 3}));
  EXPECT_EQ(std::vector<float>(adj.out_weights.begin(), adj.out_weights.begin() + 2),
            (std::vector<float>{1, 3}));
}

TEST(Batch, Errors) {
  EXPECT_THROW(make_batch(std::span<const LayerGraph* const>{}), InvalidBatchError);
  const LayerGraph a = build_conv_flat(Tensor({2, 1, 1, 1}, {1, 2}));
  const LayerGraph wide = build_conv_flat(Tensor({2, 1, 1, 2}, {1, 2, 3, 4}));
  const LayerGraph* mixed[] = {&a, &wide};
  EXPECT_THROW(make_batch(mixed), InvalidBatchError);
  LayerGraph empty;
  empty.kind = GraphKind::conv_flat;
  empty.node_features = Tensor::zeros({0, 1});
  const LayerGraph* with_empty[] = {&a, &empty};
  EXPECT_THROW(make_batch(with_empty), InvalidBatchError);
  const LayerGraph* one[] = {&a};
  const int two_labels[] = {0, 1};
  EXPECT_THROW(make_batch(one, two_labels), ShapeError);
}

TEST(Batch, SingleGraphUnlabeled) {
  const LayerGraph a = build_conv_2d(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
  const GraphBatch b = make_batch(a);
  EXPECT_TRUE(b.labels.empty());
  EXPECT_EQ(b.sources.size(), 2 * a.edges.size());
}

}  // namespace
}  // namespace debugcn
