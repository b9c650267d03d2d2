// Copyright 2026 The dpdfd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPDFD_MECHANISM_H_
#define DPDFD_MECHANISM_H_

#include <span>
#include <string_view>

#include "dpdfd/rng.h"
#include "dpdfd/tensor.h"

namespace dpdfd {

enum class BoundMode { kNormalize, kClip };

std::string_view bound_mode_name(BoundMode m);
BoundMode parse_bound_mode(std::string_view name);

struct MechanismConfig {
  double norm_bound = 1e-3;  // C
  double noise_scale = 100.0;  // sigma; noise std is sigma * C
  double stability = 1e-4;  // e
  BoundMode mode = BoundMode::kNormalize;

  void validate() const;
};

// C * g / (||g||_2 + e). With e == 0 a zero vector is rejected.
Tensor normalize_example(const Tensor& g, const MechanismConfig& cfg);

// g * min(1, C / ||g||_2).
Tensor clip_example(const Tensor& g, const MechanismConfig& cfg);

// Dispatches on cfg.mode.
Tensor bound_example(const Tensor& g, const MechanismConfig& cfg);

// (sum_i bound(g_i) + N(0, sigma^2 C^2 I)) / count. One noise vector per
// call; the list length is the divisor.
Tensor sanitize_batch(std::span<const Tensor> per_example_grads,
                      const MechanismConfig& cfg, NoiseSource& rng);

// Row-wise form over a [B x n] matrix of per-example gradients: row i becomes
// (bound(g_i) + z_i) / divisor with an independent z_i ~ N(0, sigma^2 C^2 I)
// per row.
Tensor sanitize_rows(const Tensor& per_example_grads, double divisor,
                     const MechanismConfig& cfg, NoiseSource& rng);

}  // namespace dpdfd

#endif  // DPDFD_MECHANISM_H_
