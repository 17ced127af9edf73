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

#include <benchmark/benchmark.h>

#include <vector>

#include "debugcn/batch.hpp"
#include "debugcn/bundle.hpp"
#include "debugcn/gcn.hpp"
#include "debugcn/graph.hpp"
#include "debugcn/ops.hpp"
#include "debugcn/synth.hpp"

namespace {

using namespace debugcn;

// Default-sized synthetic bundles (fc 10 x 512, conv 16 x 1 x 5 x 5).
const std::vector<WeightBundle>& bundles() {
  static const std::vector<WeightBundle> all = [] {
    SynthSpec spec;
    spec.num_clean = spec.num_trojaned = 12;
    std::vector<WeightBundle> out;
    for (auto& [entry, b] : generate_in_memory(spec)) out.push_back(std::move(b));
    return out;
  }();
  return all;
}

void BM_BuildFcGraph(benchmark::State& state) {
  const auto& b = bundles()[0];
  const FeatureConfig cfg = FeatureConfig::of(FeatureSet::gcn16b);
  for (auto _ : state) benchmark::DoNotOptimize(build_fc_bipartite(b.fc_weight, cfg));
}
BENCHMARK(BM_BuildFcGraph);

void BM_BuildConv2d(benchmark::State& state) {
  const auto& b = bundles()[0];
  for (auto _ : state) benchmark::DoNotOptimize(build_conv_2d(*b.conv1_weight));
}
BENCHMARK(BM_BuildConv2d);

void BM_EncodeDecodeBundle(benchmark::State& state) {
  const auto& b = bundles()[0];
  for (auto _ : state) {
    const auto bytes = encode_bundle(b);
    benchmark::DoNotOptimize(decode_bundle(bytes));
  }
}
BENCHMARK(BM_EncodeDecodeBundle);

// One batch of 24 fc graphs; arg 1 adds the backward pass.
void BM_BatchStep(benchmark::State& state) {
  const FeatureConfig cfg = FeatureConfig::of(FeatureSet::gcn16b);
  std::vector<LayerGraph> graphs;
  for (const auto& b : bundles()) graphs.push_back(build_fc_bipartite(b.fc_weight, cfg));
  std::vector<const LayerGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  const GraphBatch batch = make_batch(ptrs);
  const std::vector<int> labels(graphs.size(), 1);
  GcnModel model({Modality::fc_only, FeatureSet::gcn16b, cfg.width(), 0}, 1);
  const bool backward = state.range(0) != 0;
  Tape tape;
  for (auto _ : state) {
    const Tensor logits = model.forward(tape, batch);
    const Tensor loss = softmax_cross_entropy(tape, logits, labels);
    if (backward) tape.backward(loss);
    tape.clear();
    benchmark::DoNotOptimize(loss.values()[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(graphs.size()));
}
BENCHMARK(BM_BatchStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
