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
#include <vector>

#include "debugcn/gcn.hpp"
#include "debugcn/graph.hpp"
#include "debugcn/random.hpp"
#include "debugcn/tensor.hpp"

namespace debugcn::testing {

Tensor random_tensor(Shape dims, Rng& rng, double scale = 1.0);

// Random bipartite or conv graph with small dims, for property tests.
LayerGraph random_fc_graph(Rng& rng, std::size_t max_dim, FeatureSet features);

// The gradient-oracle fixture: a 6-node fc graph (2 x 4 weights) and an
// 8-node flat conv graph (8 filters of 1 x 2 x 2), plus a dual-branch model.
struct GradientFixture {
  LayerGraph fc;
  LayerGraph conv;
  GcnModel model;
};
GradientFixture gradient_fixture(std::uint64_t seed);

}  // namespace debugcn::testing
