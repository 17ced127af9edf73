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

#include <cstdint>
#include <span>
#include <vector>

#include "debugcn/tensor.hpp"

namespace debugcn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates, one buffer per parameter, plus the step
/// counter used for bias correction. A default-constructed state is the
/// zero-moment state of step 0; buffers are sized on the first update.
struct AdamState {
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of every parameter using its accumulated
/// gradient. Parameters without a gradient buffer are treated as having a
/// zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state, double learning_rate,
               const AdamOptions& options = {});

/// Step decay: base * gamma^floor(epoch / step_size).
double step_lr(double base, double gamma, int step_size, int epoch);

}  // namespace debugcn
