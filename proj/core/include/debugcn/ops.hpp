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

#include "debugcn/tensor.hpp"

namespace debugcn {

// Differentiable ops. Every op records its backward closure on `tape` when
// any input requires a gradient; the result requires a gradient iff some
// input does. All ops reject shape mismatches with ShapeError.

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// Elementwise sum of equal shapes, or a matrix plus a broadcast bias row
/// ([n] or [1 x n] against [m x n]).
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);

/// max(0, x); the gradient at exactly 0 is 0.
Tensor relu(Tape& tape, const Tensor& x);

/// [g x d1] ++ [g x d2] -> [g x (d1 + d2)].
Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);

/// Row e of the result is scales[e] * x[indices[e]].
Tensor gather_rows_scaled(Tape& tape, const Tensor& x,
                          std::span<const std::uint32_t> indices,
                          std::span<const float> scales);

/// Row v of the result is the sum of message rows whose target is v.
/// Accumulates in double so the result does not depend on message order.
Tensor segment_sum(Tape& tape, const Tensor& messages,
                   std::span<const std::uint32_t> targets, std::size_t num_nodes);

/// Directed weighted edges in compressed form, grouped by target (for the
/// forward sum) and by source (for the gradient). Within a group edges keep
/// their original order.
struct Adjacency {
  std::size_t num_nodes = 0;
  std::vector<std::uint32_t> in_offsets, in_sources;
  std::vector<float> in_weights;
  std::vector<std::uint32_t> out_offsets, out_targets;
  std::vector<float> out_weights;

  // Throws IndexError for endpoints >= num_nodes.
  static Adjacency build(std::span<const std::uint32_t> sources,
                         std::span<const std::uint32_t> targets,
                         std::span<const float> weights, std::size_t num_nodes);
  std::size_t num_edges() const { return in_sources.size(); }
};

/// Row v of the result is sum over edges (u -> v) of w * x[u]. Same value as
/// segment_sum(gather_rows_scaled(x, sources, weights), targets) without the
/// per-edge intermediate. `adjacency` must outlive the tape's backward pass.
Tensor weighted_aggregate(Tape& tape, const Tensor& x, const Adjacency& adjacency);

/// x * self_weight + weighted_aggregate(x) * neighbor_weight + bias, followed
/// by max(0, .) when apply_relu is set, as one tape entry. Every output row is
/// computed by the same instruction sequence, so relabelling nodes permutes
/// rows without changing any value.
Tensor graph_conv(Tape& tape, const Tensor& x, const Adjacency& adjacency,
                  const Tensor& self_weight, const Tensor& neighbor_weight, const Tensor& bias,
                  bool apply_relu);

/// Per-graph mean of node rows. Every graph must own at least one node.
Tensor segment_mean(Tape& tape, const Tensor& nodes,
                    std::span<const std::uint32_t> graph_ids,
                    std::size_t num_graphs);

/// Mean over rows of -log softmax(logits)[label]; returns a one-value tensor.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits,
                             std::span<const int> labels);

/// Sum of every element; returns a one-value tensor.
Tensor sum_all(Tape& tape, const Tensor& x);

}  // namespace debugcn
