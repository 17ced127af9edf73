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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "debugcn/gcn.hpp"
#include "debugcn/graph.hpp"
#include "debugcn/manifest.hpp"

namespace debugcn {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 24;
  double learning_rate = 0.001;
  double decay_factor = 0.7;
  int step_size = 2;  // epochs per decay
  double split_ratio = 0.8;
  int num_runs = 5;
  std::uint64_t seed = 0;
  FeatureSet feature_config = FeatureSet::gcn16b;
  Modality modality = Modality::fc_only;

  // Throws ConfigError.
  void validate() const;
  // Keys are the field names above; missing keys keep their defaults and
  // unknown keys are rejected.
  static TrainConfig from_json(std::string_view json);
  std::string to_json() const;
};

/// A manifest entry turned into graphs, ready for batching.
struct Sample {
  std::string model_id;
  Label label = Label::clean;
  LayerGraph fc;
  std::optional<LayerGraph> conv;
};

// Builds the graphs `modality` needs. Throws ConfigError when a conv modality
// meets a bundle without conv1.weight.
Sample make_sample(std::string model_id, Label label, const WeightBundle& bundle,
                   FeatureSet features, Modality modality);

// Loads and converts every bundle. `threads` == 0 means hardware
// concurrency. Throws ConfigError listing every model lacking conv1.weight
// under a conv modality.
std::vector<Sample> prepare_samples(const Manifest& manifest, FeatureSet features,
                                    Modality modality, unsigned threads = 0);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified shuffle split: floor(n * ratio) training items overall, spread
// across classes by largest remainder, each class keeping at least one item
// on each side. Throws ConfigError if either class has fewer than two items.
SplitIndices split_indices(std::span<const Label> labels, double ratio, std::uint64_t seed);
std::pair<Manifest, Manifest> split(const Manifest& manifest, double ratio, std::uint64_t seed);

/// Binary confusion counts with trojaned as the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  void add(Label truth, Label predicted);
  std::size_t total() const { return tp + tn + fp + fn; }
  // Percent; 0 when nothing was evaluated.
  double accuracy() const;
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0;
  double learning_rate = 0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  Confusion train;
  Confusion test;
  double seconds = 0;
};

struct RunReport {
  std::vector<RunRecord> runs;
  double mean_train_accuracy = 0;
  double mean_test_accuracy = 0;
  std::vector<EpochRecord> mean_epochs;  // per-epoch loss averaged over runs
  double seconds = 0;

  // Timing fields are omitted when include_timing is false, which makes the
  // output a pure function of (data, config).
  std::string to_json(bool include_timing = true) const;
  // "epoch,mean_loss,lr" rows of the run-averaged curve.
  std::string loss_csv() const;
};

struct TrainResult {
  GcnModel model;  // final run's model
  RunReport report;
};

struct TrainOptions {
  unsigned threads = 0;  // graph-building parallelism; 0 = hardware concurrency
};

TrainResult train(const Manifest& manifest, const TrainConfig& config,
                  const TrainOptions& options = {});
// Same loop over already-built samples.
TrainResult train_samples(std::span<const Sample> samples, const TrainConfig& config);

struct Evaluation {
  Confusion confusion;
  std::vector<Prediction> predictions;  // one per sample, in order
};

// Throws StateError for an initialized-only model and ConfigError for an
// empty sample set.
Evaluation evaluate(const GcnModel& model, std::span<const Sample> samples,
                    std::size_t batch_size = 24);

struct PermutationReport {
  std::size_t swaps = 0;
  std::uint64_t seed = 0;
  Confusion plain;
  Confusion permuted;
  double max_logit_deviation = 0;
  bool identical_predictions = true;

  std::string to_json() const;
};

// Applies random_pair_swaps(swaps, mix(seed, i)) to the fc graph of every
// sample and compares the predictions with the unpermuted ones.
PermutationReport permutation_trial(const GcnModel& model, std::span<const Sample> samples,
                                    std::size_t swaps, std::uint64_t seed,
                                    std::size_t batch_size = 24);
// Same, against an already computed evaluate(model, samples). Throws
// ShapeError if the baseline does not cover the samples.
PermutationReport permutation_trial(const GcnModel& model, std::span<const Sample> samples,
                                    const Evaluation& plain, std::size_t swaps,
                                    std::uint64_t seed, std::size_t batch_size = 24);

}  // namespace debugcn
