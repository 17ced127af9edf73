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

#include "debugcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>
#include <utility>

#include "debugcn/error.hpp"
#include "debugcn/random.hpp"

namespace debugcn {
namespace {

void require_finite(const Tensor& t, const char* what) {
  for (float v : t.values()) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite weight");
  }
}

void require_conv(const Tensor& conv) {
  if (conv.rank() != 4) {
    throw ValidationError("conv graph: expected [F_out, F_in, H, W], got " +
                          shape_string(conv.dims()));
  }
  for (std::size_t d : conv.dims()) {
    if (d == 0) throw ValidationError("conv graph: zero-sized dimension in " +
                                      shape_string(conv.dims()));
  }
  require_finite(conv, "conv graph");
}

}  // namespace

std::string_view graph_kind_name(GraphKind kind) {
  switch (kind) {
    case GraphKind::fc_bipartite: return "fc_bipartite";
    case GraphKind::conv_flat: return "conv_flat";
    case GraphKind::conv_2d: return "conv_2d";
  }
  return "?";
}

void validate_graph(const LayerGraph& g) {
  if (g.node_features.rank() != 2 || g.node_features.rows() != g.num_nodes) {
    throw ValidationError("graph: feature matrix " + shape_string(g.node_features.dims()) +
                          " does not have " + std::to_string(g.num_nodes) + " rows");
  }
  if (g.edge_weights.size() != g.edges.size()) {
    throw ValidationError("graph: edge/weight count mismatch");
  }
  if (g.left_nodes > g.num_nodes) throw ValidationError("graph: left side larger than graph");
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Edge e = g.edges[i];
    if (e.u >= g.num_nodes || e.v >= g.num_nodes) {
      throw ValidationError("graph: edge " + std::to_string(i) + " endpoint out of range");
    }
    if (e.u == e.v) throw ValidationError("graph: self-loop at node " + std::to_string(e.u));
    if (!seen.insert(std::minmax(e.u, e.v)).second) {
      throw ValidationError("graph: duplicate edge (" + std::to_string(e.u) + "," +
                            std::to_string(e.v) + ")");
    }
    if (!std::isfinite(g.edge_weights[i])) {
      throw ValidationError("graph: non-finite weight on edge " + std::to_string(i));
    }
  }
}

std::vector<std::size_t> degrees(const LayerGraph& g) {
  std::vector<std::size_t> deg(g.num_nodes, 0);
  for (const Edge& e : g.edges) {
    ++deg[e.u];
    ++deg[e.v];
  }
  return deg;
}

LayerGraph build_fc_bipartite(const Tensor& fc, const FeatureConfig& config) {
  if (fc.rank() != 2 || fc.dims()[0] == 0 || fc.dims()[1] == 0) {
    throw ValidationError("fc graph: expected a non-empty [outputs, inputs] matrix, got " +
                          shape_string(fc.dims()));
  }
  require_finite(fc, "fc graph");
  const std::size_t r = fc.dims()[0], c = fc.dims()[1];
  auto w = fc.values();

  LayerGraph g;
  g.kind = GraphKind::fc_bipartite;
  g.num_nodes = c + r;
  g.left_nodes = c;
  g.edges.reserve(r * c);
  g.edge_weights.reserve(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      g.edges.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(c + i)});
      g.edge_weights.push_back(w[i * c + j]);
    }
  }

  const std::size_t d = config.width();
  std::vector<float> features;
  features.reserve(g.num_nodes * d);
  std::vector<float> incident(r);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t i = 0; i < r; ++i) incident[i] = w[i * c + j];
    auto row = compute_node_features(incident, Side::left, config);
    features.insert(features.end(), row.begin(), row.end());
  }
  for (std::size_t i = 0; i < r; ++i) {
    auto row = compute_node_features(w.subspan(i * c, c), Side::right, config);
    features.insert(features.end(), row.begin(), row.end());
  }
  g.node_features = Tensor::matrix(g.num_nodes, d, std::move(features));
  return g;
}

LayerGraph build_conv_flat(const Tensor& conv) {
  require_conv(conv);
  const std::size_t f_out = conv.dims()[0];
  const std::size_t per_filter = conv.size() / f_out;
  LayerGraph g;
  g.kind = GraphKind::conv_flat;
  g.num_nodes = f_out;
  g.node_features = Tensor::matrix(
      f_out, per_filter, std::vector<float>(conv.values().begin(), conv.values().end()));
  for (std::size_t i = 0; i + 1 < f_out; ++i) {
    g.edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1)});
    g.edge_weights.push_back(1.0f);
  }
  return g;
}

LayerGraph build_conv_2d(const Tensor& conv) {
  require_conv(conv);
  const std::size_t slices = conv.dims()[0] * conv.dims()[1];
  const std::size_t h = conv.dims()[2], w = conv.dims()[3];
  LayerGraph g;
  g.kind = GraphKind::conv_2d;
  g.num_nodes = conv.size();
  g.node_features = Tensor::matrix(
      g.num_nodes, 1, std::vector<float>(conv.values().begin(), conv.values().end()));
  auto link = [&g](std::size_t a, std::size_t b) {
    g.edges.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)});
    g.edge_weights.push_back(1.0f);
  };
  const std::size_t center = (h / 2) * w + (w / 2);
  for (std::size_t s = 0; s < slices; ++s) {
    const std::size_t base = s * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t node = base + y * w + x;
        if (x + 1 < w) link(node, node + 1);
        if (y + 1 < h) link(node, node + w);
      }
    }
    if (s + 1 < slices) link(base + center, base + h * w + center);
  }
  return g;
}

LayerGraph permute_nodes(const LayerGraph& graph, std::span<const std::uint32_t> new_index) {
  const std::size_t n = graph.num_nodes;
  if (new_index.size() != n) {
    throw ValidationError("permutation has " + std::to_string(new_index.size()) +
                          " entries for " + std::to_string(n) + " nodes");
  }
  std::vector<bool> hit(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t t = new_index[i];
    if (t >= n || hit[t]) throw ValidationError("permutation is not a bijection");
    hit[t] = true;
    if (graph.kind == GraphKind::fc_bipartite &&
        (i < graph.left_nodes) != (t < graph.left_nodes)) {
      throw ValidationError("permutation moves node " + std::to_string(i) +
                            " across the bipartite sides");
    }
  }

  LayerGraph out;
  out.kind = graph.kind;
  out.num_nodes = n;
  out.left_nodes = graph.left_nodes;
  const std::size_t d = graph.feature_width();
  auto src = graph.node_features.values();
  std::vector<float> features(src.size());
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(src.data() + i * d, d, features.data() + std::size_t{new_index[i]} * d);
  out.node_features = Tensor::matrix(n, d, std::move(features));
  out.edges.reserve(graph.edges.size());
  for (const Edge& e : graph.edges) out.edges.push_back({new_index[e.u], new_index[e.v]});
  out.edge_weights = graph.edge_weights;
  return out;
}

std::vector<std::uint32_t> random_swap_permutation(const LayerGraph& graph,
                                                   std::size_t swaps, std::uint64_t seed) {
  std::vector<std::uint32_t> perm(graph.num_nodes);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<std::uint32_t>(i);
  const std::size_t pool =
      graph.kind == GraphKind::fc_bipartite ? graph.left_nodes : graph.num_nodes;
  if (pool < 2) return perm;
  Rng rng(mix_seed(seed));
  for (std::size_t s = 0; s < swaps; ++s) {
    const auto a = rng.below(pool);
    auto b = rng.below(pool - 1);
    if (b >= a) ++b;
    std::swap(perm[a], perm[b]);
  }
  return perm;
}

LayerGraph random_pair_swaps(const LayerGraph& graph, std::size_t swaps, std::uint64_t seed) {
  return permute_nodes(graph, random_swap_permutation(graph, swaps, seed));
}

std::string graph_to_json(const LayerGraph& g) {
  nlohmann::ordered_json doc;
  doc["num_nodes"] = g.num_nodes;
  doc["kind"] = graph_kind_name(g.kind);
  doc["left_nodes"] = g.left_nodes;
  doc["feature_width"] = g.feature_width();
  doc["features"] = std::vector<float>(g.node_features.values().begin(),
                                       g.node_features.values().end());
  auto edges = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    edges.push_back({g.edges[i].u, g.edges[i].v, g.edge_weights[i]});
  doc["edges"] = std::move(edges);
  return doc.dump();
}

}  // namespace debugcn
