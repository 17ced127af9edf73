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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "debugcn/tensor.hpp"

namespace debugcn {

inline constexpr const char* kFcWeightName = "fc.weight";
inline constexpr const char* kConv1WeightName = "conv1.weight";

/// Static weights of one scanned CNN: the final fully-connected matrix
/// ([outputs, inputs]) and, optionally, the first convolution
/// ([F_out, F_in, H, W]).
struct WeightBundle {
  std::string model_id;
  Tensor fc_weight;
  std::optional<Tensor> conv1_weight;
  std::string arch_tag;
};

// Throws ValidationError naming the first violated invariant.
void validate_bundle(const WeightBundle& bundle);

std::vector<std::byte> encode_bundle(const WeightBundle& bundle);

// Unknown tensors are skipped; a note is appended to `warnings` when given.
WeightBundle decode_bundle(std::span<const std::byte> bytes,
                           std::vector<std::string>* warnings = nullptr);

void write_bundle(const WeightBundle& bundle, const std::filesystem::path& destination);

// model_id defaults to the file stem; arch_tag is empty (the manifest
// carries both).
WeightBundle read_bundle(const std::filesystem::path& source,
                         std::vector<std::string>* warnings = nullptr);

struct TensorStats {
  std::string name;
  std::size_t count = 0;
  double min = 0;
  double q1 = 0;
  double median = 0;
  double q3 = 0;
  double max = 0;
  double mean = 0;
};

// Quartiles use linear interpolation between order statistics.
TensorStats describe(std::string name, std::span<const float> values);
std::vector<TensorStats> summary_stats(const WeightBundle& bundle);
std::string stats_to_json(std::span<const TensorStats> stats);

}  // namespace debugcn
