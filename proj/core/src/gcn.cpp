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

#include "debugcn/gcn.hpp"

#include <cmath>
#include <map>
#include <string>

#include "debugcn/container.hpp"
#include "debugcn/error.hpp"
#include "debugcn/ops.hpp"

namespace debugcn {
namespace {

Tensor glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<float> v(rows * cols);
  for (float& x : v) x = static_cast<float>(rng.uniform(-limit, limit));
  return Tensor::matrix(rows, cols, std::move(v), true);
}

Tensor with_grad(Shape dims, std::vector<float> values) {
  return Tensor(std::move(dims), std::move(values), true);
}

std::vector<std::uint32_t> dims32(const Tensor& t) {
  std::vector<std::uint32_t> d;
  for (std::size_t x : t.dims()) d.push_back(static_cast<std::uint32_t>(x));
  return d;
}

std::string layer_prefix(const char* branch, std::size_t i) {
  return std::string(branch) + ".l" + std::to_string(i + 1) + ".";
}

}  // namespace

std::string_view modality_name(Modality modality) {
  switch (modality) {
    case Modality::fc_only: return "fc_only";
    case Modality::fc_plus_flat: return "fc_plus_flat";
    case Modality::fc_plus_2d: return "fc_plus_2d";
  }
  return "?";
}

Modality parse_modality(std::string_view text) {
  for (Modality m : {Modality::fc_only, Modality::fc_plus_flat, Modality::fc_plus_2d}) {
    if (modality_name(m) == text) return m;
  }
  throw ConfigError("unknown modality \"" + std::string(text) +
                    "\" (expected fc_only, fc_plus_flat or fc_plus_2d)");
}

GraphConvLayer GraphConvLayer::glorot(std::size_t d_in, std::size_t d_out, Rng& rng) {
  GraphConvLayer layer;
  layer.neighbor_weight = glorot_matrix(d_in, d_out, rng);
  layer.self_weight = glorot_matrix(d_in, d_out, rng);
  layer.bias = Tensor::zeros({d_out}, true);
  return layer;
}

Tensor graph_conv_forward(Tape& tape, const GraphConvLayer& layer, const Tensor& node_features,
                          const GraphBatch& topology, bool apply_relu) {
  if (node_features.rank() != 2 || node_features.cols() != layer.input_width()) {
    throw ShapeError("graph_conv: features " + shape_string(node_features.dims()) +
                     " do not match layer input width " +
                     std::to_string(layer.input_width()));
  }
  return graph_conv(tape, node_features, topology.adjacency, layer.self_weight,
                    layer.neighbor_weight, layer.bias, apply_relu);
}

GcnModel::GcnModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config.fc_input_width == 0) throw ConfigError("model: fc input width must be positive");
  if (config.dual_branch() != (config.conv_input_width != 0)) {
    throw ConfigError("model: conv input width must be set iff the modality has a conv branch");
  }
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));
  std::size_t width = config.fc_input_width;
  for (std::size_t i = 0; i < kLayers; ++i) {
    fc_branch_.push_back(GraphConvLayer::glorot(width, kHidden, rng));
    width = kHidden;
  }
  if (config.dual_branch()) {
    width = config.conv_input_width;
    for (std::size_t i = 0; i < kLayers; ++i) {
      conv_branch_.push_back(GraphConvLayer::glorot(width, kHidden, rng));
      width = kHidden;
    }
  }
  const std::size_t head_in = config.dual_branch() ? 2 * kHidden : kHidden;
  head_weight_ = glorot_matrix(head_in, kClasses, rng);
  head_bias_ = Tensor::zeros({kClasses}, true);
}

GcnModel GcnModel::clone() const {
  GcnModel copy;
  copy.config_ = config_;
  copy.state_ = state_;
  auto clone_layers = [](const std::vector<GraphConvLayer>& layers) {
    std::vector<GraphConvLayer> out;
    for (const auto& l : layers)
      out.push_back({l.neighbor_weight.clone(), l.self_weight.clone(), l.bias.clone()});
    return out;
  };
  copy.fc_branch_ = clone_layers(fc_branch_);
  copy.conv_branch_ = clone_layers(conv_branch_);
  copy.head_weight_ = head_weight_.clone();
  copy.head_bias_ = head_bias_.clone();
  return copy;
}

Tensor GcnModel::branch(Tape& tape, std::span<const GraphConvLayer> layers,
                        const GraphBatch& batch) const {
  Tensor h = batch.features;
  for (const GraphConvLayer& layer : layers) {
    h = graph_conv_forward(tape, layer, h, batch, true);
  }
  return segment_mean(tape, h, batch.graph_ids, batch.num_graphs);
}

Tensor GcnModel::forward(Tape& tape, const GraphBatch& fc, const GraphBatch* conv) const {
  if (config_.dual_branch() != (conv != nullptr)) {
    throw ConfigError(config_.dual_branch()
                          ? "model is dual-branch but no conv batch was given"
                          : "model is single-branch but a conv batch was given");
  }
  Tensor pooled = branch(tape, fc_branch_, fc);
  if (conv) {
    if (conv->num_graphs != fc.num_graphs) {
      throw ConfigError("fc batch has " + std::to_string(fc.num_graphs) +
                        " graphs, conv batch has " + std::to_string(conv->num_graphs));
    }
    pooled = concat_cols(tape, pooled, branch(tape, conv_branch_, *conv));
  }
  return add(tape, matmul(tape, pooled, head_weight_), head_bias_);
}

std::vector<Tensor> GcnModel::parameters() const {
  std::vector<Tensor> out;
  for (const auto* layers : {&fc_branch_, &conv_branch_}) {
    for (const auto& l : *layers) {
      out.push_back(l.neighbor_weight);
      out.push_back(l.self_weight);
      out.push_back(l.bias);
    }
  }
  out.push_back(head_weight_);
  out.push_back(head_bias_);
  return out;
}

std::vector<std::byte> GcnModel::encode() const {
  std::vector<RawTensor> tensors;
  auto put = [&tensors](std::string name, const Tensor& t) {
    tensors.push_back(float_tensor(std::move(name), dims32(t), t.values()));
  };
  for (std::size_t i = 0; i < fc_branch_.size(); ++i) {
    const std::string p = layer_prefix("branchfc", i);
    put(p + "W", fc_branch_[i].neighbor_weight);
    put(p + "B", fc_branch_[i].self_weight);
    put(p + "bias", fc_branch_[i].bias);
  }
  for (std::size_t i = 0; i < conv_branch_.size(); ++i) {
    const std::string p = layer_prefix("branchconv", i);
    put(p + "W", conv_branch_[i].neighbor_weight);
    put(p + "B", conv_branch_[i].self_weight);
    put(p + "bias", conv_branch_[i].bias);
  }
  put("head.W", head_weight_);
  put("head.bias", head_bias_);
  tensors.push_back(RawTensor{
      "config",
      {5},
      {config_.dual_branch() ? 2u : 1u, static_cast<std::uint32_t>(config_.fc_input_width),
       static_cast<std::uint32_t>(config_.conv_input_width),
       static_cast<std::uint32_t>(config_.features),
       static_cast<std::uint32_t>(config_.modality)}});
  return encode_container(tensors);
}

GcnModel GcnModel::decode(std::span<const std::byte> bytes) {
  std::map<std::string, RawTensor> by_name;
  for (RawTensor& t : decode_container(bytes)) by_name.emplace(t.name, std::move(t));

  auto cfg_it = by_name.find("config");
  if (cfg_it == by_name.end()) {
    throw ParseError(ParseErrorKind::missing_tensor, "checkpoint: missing tensor \"config\"");
  }
  const auto& words = cfg_it->second.words;
  if (words.size() != 5 || (words[0] != 1 && words[0] != 2) || words[3] > 4 || words[4] > 2 ||
      (words[0] == 2) != (words[4] != 0)) {
    throw ParseError(ParseErrorKind::bad_config, "checkpoint: malformed config tensor");
  }
  ModelConfig config;
  config.fc_input_width = words[1];
  config.conv_input_width = words[2];
  config.features = static_cast<FeatureSet>(words[3]);
  config.modality = static_cast<Modality>(words[4]);

  GcnModel model(config, 0);
  auto fetch = [&by_name](const std::string& name, const Tensor& like) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw ParseError(ParseErrorKind::missing_tensor,
                       "checkpoint: missing tensor \"" + name + "\"");
    }
    Shape dims(it->second.dims.begin(), it->second.dims.end());
    if (dims != like.dims()) {
      throw ParseError(ParseErrorKind::bad_dims, "checkpoint: tensor \"" + name + "\" has shape " +
                                                     shape_string(dims) + ", expected " +
                                                     shape_string(like.dims()));
    }
    return with_grad(std::move(dims), float_values(it->second));
  };
  for (std::size_t i = 0; i < model.fc_branch_.size(); ++i) {
    auto& l = model.fc_branch_[i];
    const std::string p = layer_prefix("branchfc", i);
    l.neighbor_weight = fetch(p + "W", l.neighbor_weight);
    l.self_weight = fetch(p + "B", l.self_weight);
    l.bias = fetch(p + "bias", l.bias);
  }
  for (std::size_t i = 0; i < model.conv_branch_.size(); ++i) {
    auto& l = model.conv_branch_[i];
    const std::string p = layer_prefix("branchconv", i);
    l.neighbor_weight = fetch(p + "W", l.neighbor_weight);
    l.self_weight = fetch(p + "B", l.self_weight);
    l.bias = fetch(p + "bias", l.bias);
  }
  model.head_weight_ = fetch("head.W", model.head_weight_);
  model.head_bias_ = fetch("head.bias", model.head_bias_);
  model.state_ = ModelState::loaded;
  return model;
}

void GcnModel::save(const std::filesystem::path& path) const {
  write_file_bytes(path, encode());
}

GcnModel GcnModel::load(const std::filesystem::path& path) {
  return decode(read_file_bytes(path));
}

Prediction prediction_from_logits(float clean_logit, float trojaned_logit) {
  Prediction p;
  p.logits = {clean_logit, trojaned_logit};
  const double diff = static_cast<double>(trojaned_logit) - static_cast<double>(clean_logit);
  // p_trojaned = sigmoid(diff), evaluated on the stable side.
  if (diff >= 0) {
    const double e = std::exp(-diff);
    p.probabilities = {e / (1.0 + e), 1.0 / (1.0 + e)};
  } else {
    const double e = std::exp(diff);
    p.probabilities = {1.0 / (1.0 + e), e / (1.0 + e)};
  }
  p.label = trojaned_logit > clean_logit ? Label::trojaned : Label::clean;
  return p;
}

Prediction predict(const GcnModel& model, const LayerGraph& fc_graph,
                   const LayerGraph* conv_graph) {
  if (model.state() == ModelState::initialized) {
    throw StateError("predict: model has not been trained or loaded");
  }
  Tape tape;
  GraphBatch fc = make_batch(fc_graph);
  std::optional<GraphBatch> conv;
  if (conv_graph) conv = make_batch(*conv_graph);
  Tensor logits = model.forward(tape, fc, conv ? &*conv : nullptr);
  return prediction_from_logits(logits.at(0, 0), logits.at(0, 1));
}

}  // namespace debugcn
