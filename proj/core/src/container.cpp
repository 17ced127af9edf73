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

#include "debugcn/container.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <set>

#include "debugcn/error.hpp"

namespace debugcn {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<std::byte>(v)); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void raw(std::span<const std::byte> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return std::to_integer<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = std::to_integer<std::uint16_t>(bytes_[pos_]) |
                      static_cast<std::uint16_t>(std::to_integer<std::uint16_t>(bytes_[pos_ + 1]) << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::to_integer<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::byte> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(ParseErrorKind::truncated,
                       "truncated payload: need " + std::to_string(n) +
                           " bytes at offset " + std::to_string(pos_) + ", have " +
                           std::to_string(bytes_.size() - pos_));
    }
  }

  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> encode_container(std::span<const RawTensor> tensors) {
  Writer w;
  w.raw(std::as_bytes(std::span(kContainerMagic)));
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const RawTensor& t : tensors) {
    if (t.name.size() > 0xffff) throw ValidationError("tensor name too long: " + t.name);
    if (t.dims.size() > 0xff) throw ValidationError("too many dims for tensor " + t.name);
    std::uint64_t count = 1;
    for (std::uint32_t d : t.dims) count *= d;
    if (count != t.words.size()) {
      throw ValidationError("tensor " + t.name + ": dims hold " + std::to_string(count) +
                            " values, payload has " + std::to_string(t.words.size()));
    }
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.raw(std::as_bytes(std::span(t.name.data(), t.name.size())));
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) w.u32(d);
    for (std::uint32_t word : t.words) w.u32(word);
  }
  return w.take();
}

std::vector<RawTensor> decode_container(std::span<const std::byte> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 ||
      !std::equal(bytes.begin(), bytes.begin() + 4,
                  std::as_bytes(std::span(kContainerMagic)).begin())) {
    throw ParseError(ParseErrorKind::bad_magic, "bad magic: expected \"DWB1\"");
  }
  r.take(4);
  const std::uint32_t count = r.u32();
  std::vector<RawTensor> out;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    RawTensor t;
    const std::uint16_t name_len = r.u16();
    auto name = r.take(name_len);
    t.name.assign(reinterpret_cast<const char*>(name.data()), name.size());
    const std::uint8_t ndim = r.u8();
    std::uint64_t n = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      t.dims.push_back(r.u32());
      n *= t.dims.back();
      // Caps n before it can overflow; any larger count is truncated anyway.
      if (n > bytes.size()) n = bytes.size() + 1;
    }
    if (n * 4 > r.remaining()) {
      throw ParseError(ParseErrorKind::truncated,
                       "truncated payload: tensor \"" + t.name + "\" needs " +
                           std::to_string(n * 4) + " bytes, have " +
                           std::to_string(r.remaining()));
    }
    t.words.resize(n);
    for (auto& word : t.words) word = r.u32();
    if (!seen.insert(t.name).second) {
      throw ParseError(ParseErrorKind::duplicate_tensor,
                       "duplicate tensor \"" + t.name + "\"");
    }
    out.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw ParseError(ParseErrorKind::trailing_bytes,
                     "trailing bytes: " + std::to_string(r.remaining()) +
                         " unread after " + std::to_string(count) + " tensors");
  }
  return out;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> chars((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  std::vector<std::byte> bytes(chars.size());
  std::transform(chars.begin(), chars.end(), bytes.begin(),
                 [](char c) { return static_cast<std::byte>(c); });
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

RawTensor float_tensor(std::string name, std::vector<std::uint32_t> dims,
                       std::span<const float> values) {
  RawTensor t{std::move(name), std::move(dims), {}};
  t.words.reserve(values.size());
  for (float v : values) t.words.push_back(std::bit_cast<std::uint32_t>(v));
  return t;
}

std::vector<float> float_values(const RawTensor& tensor) {
  std::vector<float> out;
  out.reserve(tensor.words.size());
  for (std::uint32_t w : tensor.words) out.push_back(std::bit_cast<float>(w));
  return out;
}

}  // namespace debugcn
