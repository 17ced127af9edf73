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

#include <stdexcept>
#include <string>

namespace debugcn {

// Root of every error the library throws. Messages are single-line so the
// CLI can forward them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class InvalidBatchError : public Error {
 public:
  using Error::Error;
};

// Value-level checks: non-finite weights, bad dims, bad config values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  bad_magic,
  truncated,
  trailing_bytes,
  missing_tensor,
  bad_rank,
  bad_dims,
  duplicate_tensor,
  bad_config,
};

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

// Model/batch arity mismatches and inconsistent train configurations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation attempted on a model that was neither trained nor loaded.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace debugcn
