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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace debugcn {

/// One named entry of a "DWB1" container. Payload words are kept as raw
/// 32-bit patterns; float tensors store IEEE-754 bits, config tensors store
/// unsigned integers.
struct RawTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint32_t> words;
};

inline constexpr char kContainerMagic[4] = {'D', 'W', 'B', '1'};

// Layout, all integers little-endian:
//   "DWB1" | u32 tensor_count | per tensor:
//   u16 name_len | name bytes | u8 ndim | ndim x u32 dims | prod(dims) x 32-bit words
std::vector<std::byte> encode_container(std::span<const RawTensor> tensors);
// Throws ParseError on bad magic, truncation, trailing bytes or duplicate names.
std::vector<RawTensor> decode_container(std::span<const std::byte> bytes);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

RawTensor float_tensor(std::string name, std::vector<std::uint32_t> dims,
                       std::span<const float> values);
std::vector<float> float_values(const RawTensor& tensor);

}  // namespace debugcn
