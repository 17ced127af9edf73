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

#include "debugcn/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "debugcn/container.hpp"
#include "debugcn/error.hpp"

namespace debugcn {
namespace {

void check_tensor(const Tensor& t, const char* name, std::size_t rank) {
  if (!t.defined()) throw ValidationError(std::string(name) + ": missing");
  if (t.rank() != rank) {
    throw ValidationError(std::string(name) + ": expected " + std::to_string(rank) +
                          "-D tensor, got " + shape_string(t.dims()));
  }
  for (std::size_t d : t.dims()) {
    if (d == 0) throw ValidationError(std::string(name) + ": zero-sized dimension in " +
                                      shape_string(t.dims()));
    if (d > 0xffffffffu) throw ValidationError(std::string(name) + ": dimension too large");
  }
  auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw ValidationError(std::string(name) + ": non-finite value at flat index " +
                            std::to_string(i));
    }
  }
}

std::vector<std::uint32_t> dims32(const Tensor& t) {
  std::vector<std::uint32_t> d;
  for (std::size_t x : t.dims()) d.push_back(static_cast<std::uint32_t>(x));
  return d;
}

Tensor to_tensor(const RawTensor& raw) {
  Shape dims(raw.dims.begin(), raw.dims.end());
  return Tensor(std::move(dims), float_values(raw));
}

}  // namespace

void validate_bundle(const WeightBundle& bundle) {
  check_tensor(bundle.fc_weight, kFcWeightName, 2);
  if (bundle.conv1_weight) check_tensor(*bundle.conv1_weight, kConv1WeightName, 4);
}

std::vector<std::byte> encode_bundle(const WeightBundle& bundle) {
  validate_bundle(bundle);
  std::vector<RawTensor> tensors;
  tensors.push_back(float_tensor(kFcWeightName, dims32(bundle.fc_weight),
                                 bundle.fc_weight.values()));
  if (bundle.conv1_weight) {
    tensors.push_back(float_tensor(kConv1WeightName, dims32(*bundle.conv1_weight),
                                   bundle.conv1_weight->values()));
  }
  return encode_container(tensors);
}

WeightBundle decode_bundle(std::span<const std::byte> bytes,
                           std::vector<std::string>* warnings) {
  WeightBundle bundle;
  bool have_fc = false;
  for (const RawTensor& raw : decode_container(bytes)) {
    if (raw.name == kFcWeightName) {
      if (raw.dims.size() != 2) {
        throw ParseError(ParseErrorKind::bad_rank,
                         "fc.weight must be 2-D, got " + std::to_string(raw.dims.size()) +
                             " dims");
      }
      bundle.fc_weight = to_tensor(raw);
      have_fc = true;
    } else if (raw.name == kConv1WeightName) {
      if (raw.dims.size() != 4) {
        throw ParseError(ParseErrorKind::bad_rank,
                         "conv1.weight must be 4-D, got " +
                             std::to_string(raw.dims.size()) + " dims");
      }
      bundle.conv1_weight = to_tensor(raw);
    } else if (warnings) {
      warnings->push_back("ignoring unknown tensor \"" + raw.name + "\"");
    }
  }
  if (!have_fc) {
    throw ParseError(ParseErrorKind::missing_tensor,
                     "missing required tensor \"fc.weight\"");
  }
  for (const Tensor* t : {&bundle.fc_weight,
                          bundle.conv1_weight ? &*bundle.conv1_weight : nullptr}) {
    if (!t) continue;
    for (std::size_t d : t->dims()) {
      if (d == 0) {
        throw ParseError(ParseErrorKind::bad_dims,
                         "zero-sized dimension in " + shape_string(t->dims()));
      }
    }
  }
  validate_bundle(bundle);
  return bundle;
}

void write_bundle(const WeightBundle& bundle, const std::filesystem::path& destination) {
  write_file_bytes(destination, encode_bundle(bundle));
}

WeightBundle read_bundle(const std::filesystem::path& source,
                         std::vector<std::string>* warnings) {
  WeightBundle bundle = decode_bundle(read_file_bytes(source), warnings);
  bundle.model_id = source.stem().string();
  return bundle;
}

TensorStats describe(std::string name, std::span<const float> values) {
  TensorStats s;
  s.name = std::move(name);
  s.count = values.size();
  if (values.empty()) return s;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
  };
  s.min = sorted.front();
  s.max = sorted.back();
  s.mean = sum / static_cast<double>(sorted.size());
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  return s;
}

std::vector<TensorStats> summary_stats(const WeightBundle& bundle) {
  std::vector<TensorStats> out;
  out.push_back(describe(kFcWeightName, bundle.fc_weight.values()));
  if (bundle.conv1_weight) {
    out.push_back(describe(kConv1WeightName, bundle.conv1_weight->values()));
  }
  return out;
}

std::string stats_to_json(std::span<const TensorStats> stats) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const TensorStats& s : stats) {
    arr.push_back({{"name", s.name},
                   {"count", s.count},
                   {"min", s.min},
                   {"q1", s.q1},
                   {"median", s.median},
                   {"q3", s.q3},
                   {"max", s.max},
                   {"mean", s.mean}});
  }
  return arr.dump(2);
}

}  // namespace debugcn
