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

#include "debugcn/adam.hpp"

#include <cmath>

#include "debugcn/error.hpp"

namespace debugcn {

void adam_step(std::span<Tensor> params, AdamState& state, double learning_rate,
               const AdamOptions& options) {
  if (state.first_moment.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.first_moment[i].assign(params[i].size(), 0.0f);
      state.second_moment[i].assign(params[i].size(), 0.0f);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: state tracks " +
                     std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  const double step_size = learning_rate / correction1;
  const double sqrt_correction2 = std::sqrt(correction2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto value = p.mutable_values();
    auto grad = p.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != value.size()) {
      throw ShapeError("adam_step: moment buffer size mismatch for parameter " +
                       std::to_string(i));
    }
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      const double mj = options.beta1 * m[j] + (1.0 - options.beta1) * g;
      const double vj = options.beta2 * v[j] + (1.0 - options.beta2) * g * g;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double denom = std::sqrt(vj) / sqrt_correction2 + options.eps;
      value[j] = static_cast<float>(value[j] - step_size * mj / denom);
    }
  }
}

double step_lr(double base, double gamma, int step_size, int epoch) {
  return base * std::pow(gamma, epoch / step_size);
}

}  // namespace debugcn
