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
#include <string>
#include <string_view>

#include "debugcn/bundle.hpp"
#include "debugcn/manifest.hpp"

namespace debugcn {

/// Population parameters for synthetic clean/trojaned weight bundles.
struct SynthSpec {
  std::size_t num_clean = 100;
  std::size_t num_trojaned = 100;
  std::array<std::size_t, 2> fc_shape{10, 512};                  // [outputs, inputs]
  std::optional<std::array<std::size_t, 4>> conv_shape{{16, 1, 5, 5}};
  double clean_scale = 0.05;
  double trojan_tail_scale = 0.25;
  double trojan_column_fraction = 0.05;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  // Field names as above; "conv_shape": null disables the conv tensor.
  // Unknown keys are rejected.
  static SynthSpec from_json(std::string_view json);
  std::string to_json() const;
};

// Number of fc columns (resp. conv filters) redrawn in a trojaned bundle:
// round(fraction * count), at least 1.
std::size_t perturbed_count(std::size_t count, double fraction);

/// Bundle `index` of the given class. Clean weights are i.i.d.
/// N(0, clean_scale^2); a trojaned bundle additionally redraws a seeded
/// subset of fc input columns and conv output filters from
/// N(0, trojan_tail_scale^2). Pure function of (spec, label, index).
WeightBundle generate_bundle(const SynthSpec& spec, Label label, std::size_t index);

// Writes <out_dir>/<model_id>.dwb for every bundle plus
// <out_dir>/manifest.json, and returns the manifest.
Manifest generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

// Same population without touching the filesystem (paths are left empty).
std::vector<std::pair<ManifestEntry, WeightBundle>> generate_in_memory(const SynthSpec& spec);

}  // namespace debugcn
