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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace debugcn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& dims);
std::string shape_string(const Shape& dims);

/// Dense row-major float32 tensor with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage. Values produced by an op are
/// never written again; only parameters are updated in place (through
/// mutable_values) by the optimizer.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape dims, std::vector<float> values, bool requires_grad = false);

  static Tensor zeros(Shape dims, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<float> values, bool requires_grad = false);

  bool defined() const noexcept { return storage_ != nullptr; }
  const Shape& dims() const noexcept;
  std::size_t rank() const noexcept { return dims().size(); }
  std::size_t size() const noexcept;
  // First dimension; 1 for scalars.
  std::size_t rows() const noexcept;
  // Product of the trailing dimensions.
  std::size_t cols() const noexcept;

  std::span<const float> values() const noexcept;
  std::span<float> mutable_values() noexcept;
  float at(std::size_t row, std::size_t col) const;
  float item() const;

  bool requires_grad() const noexcept;
  bool has_grad() const noexcept;
  // Empty span when no gradient has been accumulated yet.
  std::span<const float> grad() const noexcept;
  // Allocates a zeroed buffer on first use.
  std::span<float> grad_buffer() const;
  void zero_grad() const noexcept;

  bool shares_storage(const Tensor& other) const noexcept {
    return storage_ == other.storage_;
  }
  Tensor clone() const;

 private:
  struct Storage {
    Shape dims;
    std::vector<float> values;
    std::vector<float> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

/// Ordered record of executed differentiable ops.
///
/// Each forward pass records onto a fresh (or cleared) tape; backward replays
/// the recorded closures in reverse execution order.
class Tape {
 public:
  using BackwardFn = std::function<void()>;
  using Visitor = std::function<void(std::size_t index, std::string_view op)>;

  void record(std::string_view op, BackwardFn backward,
              std::initializer_list<Tensor> touched);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward closure.
  void backward(const Tensor& loss, const Visitor& visit = {});
  // Vector-Jacobian product: seeds output's gradient with `upstream` (same
  // size as output) instead of 1.
  void backward(const Tensor& output, std::span<const float> upstream,
                const Visitor& visit = {});

  // Drops recorded ops and zeroes the gradient of every tensor they touched.
  void clear();

  std::size_t size() const noexcept { return entries_.size(); }

 private:
  struct Entry {
    std::string_view op;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  std::vector<Tensor> touched_;
};

}  // namespace debugcn
