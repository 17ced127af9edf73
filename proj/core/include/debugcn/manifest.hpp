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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "debugcn/bundle.hpp"

namespace debugcn {

enum class Label : int { clean = 0, trojaned = 1 };

std::string_view label_name(Label label);
std::optional<Label> parse_label(std::string_view text);

struct ManifestEntry {
  std::filesystem::path path;  // absolute, or relative to the working directory
  Label label = Label::clean;
  std::string model_id;
  std::string arch_tag;
};

/// Labeled listing of bundle files forming one scan dataset.
struct Manifest {
  std::vector<ManifestEntry> entries;

  std::size_t count(Label label) const;
};

// Parses the JSON array form. Relative paths are resolved against base_dir.
// Throws ManifestError on schema violations or duplicate model ids.
Manifest parse_manifest(std::string_view json, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);

// Paths under base_dir are written relative to it.
std::string manifest_to_json(const Manifest& manifest, const std::filesystem::path& base_dir);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Reads the entry's bundle and stamps it with the manifest's id and tag.
WeightBundle load_entry(const ManifestEntry& entry,
                        std::vector<std::string>* warnings = nullptr);

// Parses every referenced bundle; throws on the first failure, naming the entry.
void validate_manifest_files(const Manifest& manifest);

}  // namespace debugcn
