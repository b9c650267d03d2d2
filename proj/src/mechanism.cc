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

#include "dpdfd/mechanism.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpdfd/errors.h"

namespace dpdfd {

std::string_view bound_mode_name(BoundMode m) {
  return m == BoundMode::kNormalize ? "normalize" : "clip";
}

BoundMode parse_bound_mode(std::string_view name) {
  if (name == "normalize") return BoundMode::kNormalize;
  if (name == "clip") return BoundMode::kClip;
  throw ValidationError("mode must be normalize or clip, got '" +
                        std::string(name) + "'");
}

void MechanismConfig::validate() const {
  if (!(norm_bound > 0.0) || !std::isfinite(norm_bound)) {
    throw ValidationError("norm bound C must be positive and finite");
  }
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw ValidationError("noise scale sigma must be nonnegative and finite");
  }
  if (!(stability >= 0.0) || !std::isfinite(stability)) {
    throw ValidationError("stability e must be nonnegative and finite");
  }
}

namespace {

// Scales g by `scale`, then backs the scale off one ulp at a time until the
// result norm is below (strict) or at most `bound`.
Tensor scale_within(const Tensor& g, double scale, double bound, bool strict) {
  Tensor out = g;
  for (;;) {
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * scale;
    const double norm = l2_norm(out.values());
    if (strict ? norm < bound : norm <= bound) return out;
    scale = std::nextafter(scale, 0.0);
  }
}

}  // namespace

Tensor normalize_example(const Tensor& g, const MechanismConfig& cfg) {
  require_finite(g, "gradient");
  const double norm = l2_norm(g.values());
  const double denom = norm + cfg.stability;
  if (denom == 0.0) {
    throw DegenerateInputError(
        "cannot normalize a zero gradient with stability e = 0");
  }
  return scale_within(g, cfg.norm_bound / denom, cfg.norm_bound,
                      cfg.stability > 0.0);
}

Tensor clip_example(const Tensor& g, const MechanismConfig& cfg) {
  require_finite(g, "gradient");
  const double norm = l2_norm(g.values());
  if (norm <= cfg.norm_bound) return g;
  return scale_within(g, cfg.norm_bound / norm, cfg.norm_bound, false);
}

Tensor bound_example(const Tensor& g, const MechanismConfig& cfg) {
  return cfg.mode == BoundMode::kNormalize ? normalize_example(g, cfg)
                                           : clip_example(g, cfg);
}

Tensor sanitize_batch(std::span<const Tensor> per_example_grads,
                      const MechanismConfig& cfg, NoiseSource& rng) {
  cfg.validate();
  if (per_example_grads.empty()) {
    throw ValidationError("sanitize_batch needs at least one gradient");
  }
  const std::size_t n = per_example_grads.front().size();
  for (const Tensor& g : per_example_grads) {
    if (g.size() != n) {
      throw DimensionError("gradient lengths differ: " + std::to_string(n) +
                           " vs " + std::to_string(g.size()));
    }
  }
  std::vector<double> sum(n, 0.0);
  for (const Tensor& g : per_example_grads) {
    const Tensor b = bound_example(g, cfg);
    for (std::size_t j = 0; j < n; ++j) sum[j] += b[j];
  }
  const double std_dev = cfg.noise_scale * cfg.norm_bound;
  if (std_dev > 0.0) {
    for (double& v : sum) v += std_dev * rng.gaussian();
  }
  const double count = static_cast<double>(per_example_grads.size());
  for (double& v : sum) v /= count;
  return Tensor::vector(std::move(sum));
}

Tensor sanitize_rows(const Tensor& per_example_grads, double divisor,
                     const MechanismConfig& cfg, NoiseSource& rng) {
  cfg.validate();
  if (per_example_grads.rank() != 2) {
    throw DimensionError("sanitize_rows needs a [B x n] matrix, got " +
                         per_example_grads.shape_string());
  }
  if (!(divisor > 0.0)) throw ValidationError("divisor must be positive");
  const std::size_t n = per_example_grads.cols();
  const double std_dev = cfg.noise_scale * cfg.norm_bound;
  Tensor out = Tensor::zeros(per_example_grads.rows(), n);
  for (std::size_t r = 0; r < per_example_grads.rows(); ++r) {
    const Tensor b = bound_example(per_example_grads.row_tensor(r), cfg);
    auto o = out.row(r);
    for (std::size_t j = 0; j < n; ++j) {
      double v = b[j];
      if (std_dev > 0.0) v += std_dev * rng.gaussian();
      o[j] = v / divisor;
    }
  }
  return out;
}

}  // namespace dpdfd
