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

#include "debugcn/manifest.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "debugcn/error.hpp"

namespace debugcn {

std::string_view label_name(Label label) {
  return label == Label::clean ? "clean" : "trojaned";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "clean") return Label::clean;
  if (text == "trojaned") return Label::trojaned;
  return std::nullopt;
}

std::size_t Manifest::count(Label label) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.label == label;
  return n;
}

Manifest parse_manifest(std::string_view json, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ManifestError("manifest must be a JSON array");

  static const std::set<std::string> kKeys = {"path", "label", "model_id", "arch_tag"};
  Manifest manifest;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = "manifest entry " + std::to_string(i);
    if (!item.is_object()) throw ManifestError(where + " is not an object");
    for (const auto& [key, value] : item.items()) {
      if (!kKeys.count(key)) throw ManifestError(where + ": unknown key \"" + key + "\"");
      if (!value.is_string()) throw ManifestError(where + ": \"" + key + "\" must be a string");
    }
    for (const auto& key : kKeys) {
      if (!item.contains(key)) throw ManifestError(where + ": missing key \"" + key + "\"");
    }
    ManifestEntry entry;
    std::filesystem::path p = item["path"].get<std::string>();
    entry.path = p.is_absolute() ? p : base_dir / p;
    auto label = parse_label(item["label"].get<std::string>());
    if (!label) {
      throw ManifestError(where + ": label must be \"clean\" or \"trojaned\"");
    }
    entry.label = *label;
    entry.model_id = item["model_id"].get<std::string>();
    entry.arch_tag = item["arch_tag"].get<std::string>();
    if (entry.model_id.empty()) throw ManifestError(where + ": empty model_id");
    if (!ids.insert(entry.model_id).second) {
      throw ManifestError("duplicate model_id \"" + entry.model_id + "\"");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Manifest manifest = parse_manifest(ss.str(), path.parent_path());
  for (const auto& e : manifest.entries) {
    if (!std::filesystem::exists(e.path)) {
      throw ManifestError("model " + e.model_id + ": bundle file not found: " +
                          e.path.string());
    }
  }
  return manifest;
}

std::string manifest_to_json(const Manifest& manifest, const std::filesystem::path& base_dir) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    std::filesystem::path p = e.path;
    if (!base_dir.empty()) {
      auto rel = p.lexically_relative(base_dir);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    arr.push_back({{"path", p.generic_string()},
                   {"label", label_name(e.label)},
                   {"model_id", e.model_id},
                   {"arch_tag", e.arch_tag}});
  }
  return arr.dump(2) + "\n";
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest, path.parent_path());
  if (!out) throw IoError("write failed: " + path.string());
}

WeightBundle load_entry(const ManifestEntry& entry, std::vector<std::string>* warnings) {
  WeightBundle bundle = read_bundle(entry.path, warnings);
  bundle.model_id = entry.model_id;
  bundle.arch_tag = entry.arch_tag;
  return bundle;
}

void validate_manifest_files(const Manifest& manifest) {
  for (const auto& e : manifest.entries) {
    try {
      load_entry(e);
    } catch (const ParseError& err) {
      throw ParseError(err.kind(), "model " + e.model_id + ": " + err.what());
    } catch (const Error& err) {
      throw ManifestError("model " + e.model_id + ": " + err.what());
    }
  }
}

}  // namespace debugcn
