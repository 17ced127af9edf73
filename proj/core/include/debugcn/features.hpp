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

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace debugcn {

enum class FeatureSet : int { gcn5 = 0, gcn7 = 1, gcn16a = 2, gcn16b = 3, gcn18 = 4 };

/// Which per-node statistics make up a bipartite-graph node feature vector.
/// Groups are emitted in this fixed order: const1, side, mean, min, max,
/// sum, 5 histogram counts, 6 bin boundaries, degree.
struct FeatureConfig {
  FeatureSet id = FeatureSet::gcn18;
  bool const1 = false;
  bool side = false;
  bool mean = false;
  bool min = false;
  bool max = false;
  bool sum = false;
  bool hist_counts = false;
  bool hist_bounds = false;
  bool degree = false;

  static FeatureConfig of(FeatureSet id);
  // Accepts "GCN_5", "GCN_7", "GCN_16a", "GCN_16b", "GCN_18"; throws ConfigError.
  static FeatureConfig named(std::string_view name);

  std::string_view name() const;
  std::size_t width() const;
};

enum class Side : int { left = 0, right = 1 };

inline constexpr std::size_t kHistogramBins = 5;

struct Histogram {
  std::array<std::size_t, kHistogramBins> counts{};
  std::array<double, kHistogramBins + 1> bounds{};
};

// Equal-width bins over [min, max]. x lands in bin i when
// bounds[i] <= x < bounds[i+1]; the maximum lands in the last bin. When
// min == max every bound equals that value and all mass is in bin 0.
Histogram histogram(std::span<const float> values);

// Throws ValidationError on an empty incident set.
std::vector<float> compute_node_features(std::span<const float> incident_weights,
                                         Side side, const FeatureConfig& config);

}  // namespace debugcn
