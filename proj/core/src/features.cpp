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

#include "debugcn/features.hpp"

#include <algorithm>
#include <string>

#include "debugcn/error.hpp"

namespace debugcn {

FeatureConfig FeatureConfig::of(FeatureSet id) {
  FeatureConfig c;
  c.id = id;
  c.const1 = c.mean = c.min = c.max = true;
  switch (id) {
    case FeatureSet::gcn5:
      c.side = true;
      break;
    case FeatureSet::gcn7:
      c.side = c.sum = c.degree = true;
      break;
    case FeatureSet::gcn16a:
      c.side = c.hist_counts = c.hist_bounds = true;
      break;
    case FeatureSet::gcn16b:
      c.sum = c.hist_counts = c.hist_bounds = true;
      break;
    case FeatureSet::gcn18:
      c.side = c.sum = c.hist_counts = c.hist_bounds = c.degree = true;
      break;
  }
  return c;
}

FeatureConfig FeatureConfig::named(std::string_view name) {
  for (FeatureSet id : {FeatureSet::gcn5, FeatureSet::gcn7, FeatureSet::gcn16a,
                        FeatureSet::gcn16b, FeatureSet::gcn18}) {
    FeatureConfig c = of(id);
    if (c.name() == name) return c;
  }
  throw ConfigError("unknown feature config \"" + std::string(name) +
                    "\" (expected GCN_5, GCN_7, GCN_16a, GCN_16b or GCN_18)");
}

std::string_view FeatureConfig::name() const {
  switch (id) {
    case FeatureSet::gcn5: return "GCN_5";
    case FeatureSet::gcn7: return "GCN_7";
    case FeatureSet::gcn16a: return "GCN_16a";
    case FeatureSet::gcn16b: return "GCN_16b";
    case FeatureSet::gcn18: return "GCN_18";
  }
  return "?";
}

std::size_t FeatureConfig::width() const {
  return std::size_t{const1} + side + mean + min + max + sum +
         (hist_counts ? kHistogramBins : 0) + (hist_bounds ? kHistogramBins + 1 : 0) +
         degree;
}

Histogram histogram(std::span<const float> values) {
  Histogram h;
  if (values.empty()) return h;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    h.bounds.fill(lo);
    h.counts[0] = values.size();
    return h;
  }
  const double width = (hi - lo) / static_cast<double>(kHistogramBins);
  for (std::size_t i = 0; i < kHistogramBins; ++i)
    h.bounds[i] = lo + width * static_cast<double>(i);
  h.bounds[kHistogramBins] = hi;
  for (float v : values) {
    const double x = v;
    // First interior bound strictly greater than x; bin is the one before it.
    auto it = std::upper_bound(h.bounds.begin() + 1, h.bounds.end() - 1, x);
    const auto bin = static_cast<std::size_t>(it - (h.bounds.begin() + 1));
    ++h.counts[bin];
  }
  return h;
}

std::vector<float> compute_node_features(std::span<const float> incident_weights,
                                         Side side, const FeatureConfig& config) {
  if (incident_weights.empty()) {
    throw ValidationError("degenerate node: no incident weights");
  }
  double sum = 0.0;
  double lo = incident_weights[0], hi = incident_weights[0];
  for (float w : incident_weights) {
    sum += w;
    lo = std::min<double>(lo, w);
    hi = std::max<double>(hi, w);
  }
  const auto degree = static_cast<double>(incident_weights.size());

  std::vector<float> out;
  out.reserve(config.width());
  auto push = [&out](double v) { out.push_back(static_cast<float>(v)); };
  if (config.const1) push(1.0);
  if (config.side) push(side == Side::right ? 1.0 : 0.0);
  if (config.mean) push(sum / degree);
  if (config.min) push(lo);
  if (config.max) push(hi);
  if (config.sum) push(sum);
  if (config.hist_counts || config.hist_bounds) {
    const Histogram h = histogram(incident_weights);
    if (config.hist_counts)
      for (std::size_t c : h.counts) push(static_cast<double>(c));
    if (config.hist_bounds)
      for (double b : h.bounds) push(b);
  }
  if (config.degree) push(degree);
  return out;
}

}  // namespace debugcn
