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

#include "fixtures.hpp"

namespace debugcn::testing {

Tensor random_tensor(Shape dims, Rng& rng, double scale) {
  std::vector<float> v(shape_size(dims));
  for (float& x : v) x = static_cast<float>(rng.normal(0.0, scale));
  return Tensor(std::move(dims), std::move(v));
}

LayerGraph random_fc_graph(Rng& rng, std::size_t max_dim, FeatureSet features) {
  const std::size_t r = 1 + rng.below(max_dim), c = 1 + rng.below(max_dim);
  return build_fc_bipartite(random_tensor({r, c}, rng, 0.5), FeatureConfig::of(features));
}

GradientFixture gradient_fixture(std::uint64_t seed) {
  Rng rng(seed);
  LayerGraph fc = build_fc_bipartite(random_tensor({2, 4}, rng, 0.5),
                                     FeatureConfig::of(FeatureSet::gcn16b));
  LayerGraph conv = build_conv_flat(random_tensor({8, 1, 2, 2}, rng, 0.5));
  ModelConfig cfg{Modality::fc_plus_flat, FeatureSet::gcn16b, fc.feature_width(),
                  conv.feature_width()};
  return {std::move(fc), std::move(conv), GcnModel(cfg, seed)};
}

}  // namespace debugcn::testing
