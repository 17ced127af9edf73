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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "debugcn/batch.hpp"
#include "debugcn/features.hpp"
#include "debugcn/manifest.hpp"
#include "debugcn/random.hpp"
#include "debugcn/tensor.hpp"

namespace debugcn {

enum class Modality : int { fc_only = 0, fc_plus_flat = 1, fc_plus_2d = 2 };

std::string_view modality_name(Modality modality);
// Throws ConfigError for anything other than fc_only/fc_plus_flat/fc_plus_2d.
Modality parse_modality(std::string_view text);

/// Message-passing layer:
///   out[v] = self_weight^T h_v + sum_{u in N(v)} e_uv * neighbor_weight^T h_u + bias
struct GraphConvLayer {
  Tensor neighbor_weight;  // [d_in x d_out]
  Tensor self_weight;      // [d_in x d_out]
  Tensor bias;             // [d_out]

  static GraphConvLayer glorot(std::size_t d_in, std::size_t d_out, Rng& rng);
  std::size_t input_width() const { return self_weight.rows(); }
  std::size_t output_width() const { return self_weight.cols(); }
};

// Aggregates over the batch's directed edges, applies both transforms and,
// when asked, the ReLU.
Tensor graph_conv_forward(Tape& tape, const GraphConvLayer& layer, const Tensor& node_features,
                          const GraphBatch& topology, bool apply_relu = false);

struct ModelConfig {
  Modality modality = Modality::fc_only;
  FeatureSet features = FeatureSet::gcn16b;
  std::size_t fc_input_width = 0;
  std::size_t conv_input_width = 0;  // 0 when single-branch

  bool dual_branch() const { return modality != Modality::fc_only; }
};

enum class ModelState { initialized, trained, loaded };

/// One- or two-branch GraphConv classifier: per branch three
/// (graph conv -> ReLU) layers of width 64 and a mean-pool readout; pooled
/// branch vectors are concatenated and mapped to two logits.
///
/// Parameters are tensor handles; copies would alias, so the model is
/// move-only and clone() makes a deep copy.
class GcnModel {
 public:
  static constexpr std::size_t kHidden = 64;
  static constexpr std::size_t kLayers = 3;
  static constexpr std::size_t kClasses = 2;

  GcnModel(const ModelConfig& config, std::uint64_t seed);
  GcnModel(GcnModel&&) noexcept = default;
  GcnModel& operator=(GcnModel&&) noexcept = default;
  GcnModel(const GcnModel&) = delete;
  GcnModel& operator=(const GcnModel&) = delete;

  GcnModel clone() const;

  const ModelConfig& config() const { return config_; }
  ModelState state() const { return state_; }
  void mark_trained() { state_ = ModelState::trained; }

  // Logits [k x 2]. conv must be given iff the model is dual-branch.
  Tensor forward(Tape& tape, const GraphBatch& fc, const GraphBatch* conv = nullptr) const;

  // Every trainable tensor, in checkpoint order.
  std::vector<Tensor> parameters() const;
  std::span<const GraphConvLayer> fc_branch() const { return fc_branch_; }
  std::span<const GraphConvLayer> conv_branch() const { return conv_branch_; }
  const Tensor& head_weight() const { return head_weight_; }
  const Tensor& head_bias() const { return head_bias_; }

  std::vector<std::byte> encode() const;
  static GcnModel decode(std::span<const std::byte> bytes);
  void save(const std::filesystem::path& path) const;
  static GcnModel load(const std::filesystem::path& path);

 private:
  GcnModel() = default;
  Tensor branch(Tape& tape, std::span<const GraphConvLayer> layers,
                const GraphBatch& batch) const;

  ModelConfig config_;
  ModelState state_ = ModelState::initialized;
  std::vector<GraphConvLayer> fc_branch_;
  std::vector<GraphConvLayer> conv_branch_;
  Tensor head_weight_;  // [64 or 128 x 2]
  Tensor head_bias_;    // [2]
};

struct Prediction {
  Label label = Label::clean;
  std::array<double, 2> probabilities{};  // {p_clean, p_trojaned}
  std::array<float, 2> logits{};
};

// Softmax in double; exact ties resolve to clean.
Prediction prediction_from_logits(float clean_logit, float trojaned_logit);

// Throws StateError unless the model was trained or loaded.
Prediction predict(const GcnModel& model, const LayerGraph& fc_graph,
                   const LayerGraph* conv_graph = nullptr);

}  // namespace debugcn
