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

#include "debugcn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>

#include "debugcn/error.hpp"
#include "debugcn/random.hpp"

namespace debugcn {
namespace {

std::string model_id_for(Label label, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04zu", label == Label::clean ? "clean" : "trojaned", index);
  return buf;
}

std::string arch_tag_for(const SynthSpec& spec) {
  return "synthetic-fc" + std::to_string(spec.fc_shape[0]) + "x" + std::to_string(spec.fc_shape[1]);
}

// Chooses `k` distinct indices out of n, sorted.
std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(all[i], all[j]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

void SynthSpec::validate() const {
  if (!(clean_scale > 0)) throw ConfigError("synth spec: clean_scale must be positive");
  if (!(trojan_tail_scale > clean_scale)) {
    throw ConfigError("synth spec: trojan_tail_scale must exceed clean_scale");
  }
  if (!(trojan_column_fraction > 0 && trojan_column_fraction <= 1)) {
    throw ConfigError("synth spec: trojan_column_fraction must be in (0, 1]");
  }
  if (fc_shape[0] == 0 || fc_shape[1] == 0) throw ConfigError("synth spec: fc_shape dims must be >= 1");
  if (conv_shape) {
    for (std::size_t d : *conv_shape)
      if (d == 0) throw ConfigError("synth spec: conv_shape dims must be >= 1");
  }
}

SynthSpec SynthSpec::from_json(std::string_view json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("synth spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("synth spec must be a JSON object");
  SynthSpec s;
  auto count = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_unsigned()) throw ConfigError("synth spec: \"" + key + "\" must be a non-negative integer");
    return v.get<std::size_t>();
  };
  auto number = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("synth spec: \"" + key + "\" must be a number");
    return v.get<double>();
  };
  auto dims = [&count](const nlohmann::json& v, const std::string& key, std::size_t rank) {
    if (!v.is_array() || v.size() != rank) {
      throw ConfigError("synth spec: \"" + key + "\" must be an array of " + std::to_string(rank) + " integers");
    }
    std::vector<std::size_t> out;
    for (const auto& x : v) out.push_back(count(x, key));
    return out;
  };
  for (const auto& [key, value] : doc.items()) {
    if (key == "num_clean") s.num_clean = count(value, key);
    else if (key == "num_trojaned") s.num_trojaned = count(value, key);
    else if (key == "fc_shape") {
      auto d = dims(value, key, 2);
      s.fc_shape = {d[0], d[1]};
    } else if (key == "conv_shape") {
      if (value.is_null()) {
        s.conv_shape.reset();
      } else {
        auto d = dims(value, key, 4);
        s.conv_shape = std::array<std::size_t, 4>{d[0], d[1], d[2], d[3]};
      }
    } else if (key == "clean_scale") s.clean_scale = number(value, key);
    else if (key == "trojan_tail_scale") s.trojan_tail_scale = number(value, key);
    else if (key == "trojan_column_fraction") s.trojan_column_fraction = number(value, key);
    else if (key == "seed") s.seed = count(value, key);
    else throw ConfigError("synth spec: unknown key \"" + key + "\"");
  }
  s.validate();
  return s;
}

std::string SynthSpec::to_json() const {
  nlohmann::ordered_json j = {{"num_clean", num_clean},
                              {"num_trojaned", num_trojaned},
                              {"fc_shape", fc_shape},
                              {"conv_shape", nullptr},
                              {"clean_scale", clean_scale},
                              {"trojan_tail_scale", trojan_tail_scale},
                              {"trojan_column_fraction", trojan_column_fraction},
                              {"seed", seed}};
  if (conv_shape) j["conv_shape"] = *conv_shape;
  return j.dump(2);
}

std::size_t perturbed_count(std::size_t count, double fraction) {
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(count)));
  return std::clamp<std::size_t>(k, 1, count);
}

WeightBundle generate_bundle(const SynthSpec& spec, Label label, std::size_t index) {
  spec.validate();
  const std::uint64_t stream = (static_cast<std::uint64_t>(label) << 32) | index;
  Rng rng(mix_seed(spec.seed, stream));

  WeightBundle b;
  b.model_id = model_id_for(label, index);
  b.arch_tag = arch_tag_for(spec);

  const std::size_t rows = spec.fc_shape[0], cols = spec.fc_shape[1];
  std::vector<float> fc(rows * cols);
  for (float& w : fc) w = static_cast<float>(rng.normal(0.0, spec.clean_scale));
  if (label == Label::trojaned) {
    for (std::size_t j : choose(cols, perturbed_count(cols, spec.trojan_column_fraction), rng)) {
      for (std::size_t i = 0; i < rows; ++i)
        fc[i * cols + j] = static_cast<float>(rng.normal(0.0, spec.trojan_tail_scale));
    }
  }
  b.fc_weight = Tensor::matrix(rows, cols, std::move(fc));

  if (spec.conv_shape) {
    const auto& s = *spec.conv_shape;
    const std::size_t filters = s[0], per_filter = s[1] * s[2] * s[3];
    std::vector<float> conv(filters * per_filter);
    for (float& w : conv) w = static_cast<float>(rng.normal(0.0, spec.clean_scale));
    if (label == Label::trojaned) {
      for (std::size_t f : choose(filters, perturbed_count(filters, spec.trojan_column_fraction), rng)) {
        for (std::size_t k = 0; k < per_filter; ++k)
          conv[f * per_filter + k] = static_cast<float>(rng.normal(0.0, spec.trojan_tail_scale));
      }
    }
    b.conv1_weight = Tensor({s[0], s[1], s[2], s[3]}, std::move(conv));
  }
  return b;
}

std::vector<std::pair<ManifestEntry, WeightBundle>> generate_in_memory(const SynthSpec& spec) {
  spec.validate();
  std::vector<std::pair<ManifestEntry, WeightBundle>> out;
  for (Label label : {Label::clean, Label::trojaned}) {
    const std::size_t n = label == Label::clean ? spec.num_clean : spec.num_trojaned;
    for (std::size_t i = 0; i < n; ++i) {
      WeightBundle b = generate_bundle(spec, label, i);
      ManifestEntry e{{}, label, b.model_id, b.arch_tag};
      out.emplace_back(std::move(e), std::move(b));
    }
  }
  return out;
}

Manifest generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  Manifest manifest;
  for (auto& [entry, bundle] : generate_in_memory(spec)) {
    entry.path = out_dir / (entry.model_id + ".dwb");
    write_bundle(bundle, entry.path);
    manifest.entries.push_back(std::move(entry));
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace debugcn
