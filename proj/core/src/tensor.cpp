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

#include "debugcn/tensor.hpp"

#include <algorithm>

#include "debugcn/error.hpp"

namespace debugcn {

std::size_t shape_size(const Shape& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  return n;
}

std::string shape_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape dims, std::vector<float> values, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  if (shape_size(dims) != values.size()) {
    throw ShapeError("tensor: shape " + shape_string(dims) + " holds " +
                     std::to_string(shape_size(dims)) + " values, got " +
                     std::to_string(values.size()));
  }
  storage_->dims = std::move(dims);
  storage_->values = std::move(values);
  storage_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape dims, bool requires_grad) {
  std::vector<float> values(shape_size(dims), 0.0f);
  return Tensor(std::move(dims), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<float> values, bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::dims() const noexcept {
  static const Shape kEmpty;
  return storage_ ? storage_->dims : kEmpty;
}

std::size_t Tensor::size() const noexcept {
  return storage_ ? storage_->values.size() : 0;
}

std::size_t Tensor::rows() const noexcept {
  const Shape& d = dims();
  return d.empty() ? 1 : d[0];
}

std::size_t Tensor::cols() const noexcept {
  const Shape& d = dims();
  std::size_t n = 1;
  for (std::size_t i = 1; i < d.size(); ++i) n *= d[i];
  return n;
}

std::span<const float> Tensor::values() const noexcept {
  if (!storage_) return {};
  return storage_->values;
}

std::span<float> Tensor::mutable_values() noexcept {
  if (!storage_) return {};
  return storage_->values;
}

float Tensor::at(std::size_t row, std::size_t col) const {
  if (row >= rows() || col >= cols()) {
    throw IndexError("tensor: index (" + std::to_string(row) + "," +
                     std::to_string(col) + ") outside " + shape_string(dims()));
  }
  return storage_->values[row * cols() + col];
}

float Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("tensor: item() on shape " + shape_string(dims()));
  }
  return storage_->values[0];
}

bool Tensor::requires_grad() const noexcept {
  return storage_ && storage_->requires_grad;
}

bool Tensor::has_grad() const noexcept {
  return storage_ && !storage_->grad.empty();
}

std::span<const float> Tensor::grad() const noexcept {
  if (!storage_) return {};
  return storage_->grad;
}

std::span<float> Tensor::grad_buffer() const {
  if (!storage_) throw ShapeError("tensor: gradient of undefined tensor");
  if (storage_->grad.empty()) storage_->grad.assign(storage_->values.size(), 0.0f);
  return storage_->grad;
}

void Tensor::zero_grad() const noexcept {
  if (storage_) std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
  if (!storage_) return {};
  Tensor copy(storage_->dims, storage_->values, storage_->requires_grad);
  copy.storage_->grad = storage_->grad;
  return copy;
}

void Tape::record(std::string_view op, BackwardFn backward,
                  std::initializer_list<Tensor> touched) {
  entries_.push_back({op, std::move(backward)});
  for (const Tensor& t : touched) {
    if (t.requires_grad()) touched_.push_back(t);
  }
}

void Tape::backward(const Tensor& loss, const Visitor& visit) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must hold one value, got shape " +
                     shape_string(loss.dims()));
  }
  const float one = 1.0f;
  backward(loss, std::span<const float>(&one, 1), visit);
}

void Tape::backward(const Tensor& output, std::span<const float> upstream,
                    const Visitor& visit) {
  if (upstream.size() != output.size()) {
    throw ShapeError("backward: upstream gradient holds " + std::to_string(upstream.size()) +
                     " values for output shape " + shape_string(output.dims()));
  }
  if (!output.requires_grad()) return;
  auto g = output.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += upstream[i];
  for (std::size_t i = entries_.size(); i-- > 0;) {
    if (visit) visit(i, entries_[i].op);
    entries_[i].backward();
  }
}

void Tape::clear() {
  for (Tensor& t : touched_) t.zero_grad();
  touched_.clear();
  entries_.clear();
}

}  // namespace debugcn
