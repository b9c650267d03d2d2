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

#include "fd.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpdfd/losses.h"
#include "dpdfd/rng.h"

namespace dpdfd::testing {

void FdStats::merge(const FdStats& o) {
  checked += o.checked;
  failed += o.failed;
  skipped += o.skipped;
  worst_rel = std::max(worst_rel, o.worst_rel);
  if (first_failure.empty()) first_failure = o.first_failure;
}

bool fd_close(double analytic, double numeric, double* rel) {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  const double r = scale > 0.0 ? diff / scale : 0.0;
  if (rel) *rel = scale < kFdAbsFloor ? 0.0 : r;
  return diff <= kFdAbsFloor || r <= kFdRelTol;
}

void fd_compare(Tensor x, const Tensor& analytic,
                const std::function<double(const Tensor&)>& f,
                const std::function<bool(const Tensor&)>& smooth,
                const std::string& label, FdStats& stats,
                std::size_t max_entries, std::uint64_t seed) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (max_entries < idx.size()) {
    Rng pick(seed);
    for (std::size_t i = 0; i < max_entries; ++i) {
      std::swap(idx[i], idx[i + pick.uniform_index(idx.size() - i)]);
    }
    idx.resize(max_entries);
  }
  for (std::size_t i : idx) {
    const double orig = x[i];
    x[i] = orig + kFdStep;
    const bool ok_plus = smooth(x);
    const double fp = f(x);
    x[i] = orig - kFdStep;
    const bool ok_minus = smooth(x);
    const double fm = f(x);
    x[i] = orig;
    if (!ok_plus || !ok_minus) {
      ++stats.skipped;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * kFdStep);
    double rel = 0.0;
    ++stats.checked;
    const bool close = fd_close(analytic[i], numeric, &rel);
    stats.worst_rel = std::max(stats.worst_rel, rel);
    if (!close) {
      ++stats.failed;
      if (stats.first_failure.empty()) {
        stats.first_failure = label + "[" + std::to_string(i) + "] analytic " +
                              std::to_string(analytic[i]) + " numeric " +
                              std::to_string(numeric);
      }
    }
  }
}

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, double scale,
                     Rng& rng) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.values()) v = scale * rng.gaussian();
  return t;
}

Tensor random_probs(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = Tensor::zeros(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (double& v : t.row(r)) s += (v = rng.uniform(0.01, 1.0));
    for (double& v : t.row(r)) v /= s;
  }
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Sign pattern of every relu pre-activation.
std::vector<bool> relu_mask(const MlpModel& m, const ForwardTrace& t) {
  std::vector<bool> mask;
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    if (m.layers[k].activation != Activation::kRelu) continue;
    for (double v : t.pre_activations[k].values()) mask.push_back(v > 0.0);
  }
  return mask;
}

}  // namespace

FdStats check_backward(const MlpSpec& spec, std::size_t batch,
                       std::uint64_t seed, bool with_features,
                       std::size_t max_entries_per_tensor) {
  Rng rng(seed);
  MlpModel model = make_mlp(spec, rng);
  // Nonzero biases so they are exercised.
  for (Layer& l : model.layers) {
    for (double& b : l.bias.values()) b = 0.1 * rng.gaussian();
  }
  Tensor x = random_tensor(batch, spec.input_dim, 1.0, rng);
  const ForwardTrace base = forward(model, x);
  const Tensor r = random_tensor(batch, spec.output_dim, 1.0, rng);
  const Tensor feat = random_tensor(base.penultimate().rows(),
                                    base.penultimate().cols(), 1.0, rng);
  const Tensor* fp = with_features ? &feat : nullptr;
  const Gradients g = backward(model, base, r, fp);
  const std::vector<bool> mask0 = relu_mask(model, base);

  auto objective = [&](const MlpModel& m, const Tensor& in) {
    const ForwardTrace t = forward(m, in);
    double v = dot(r, t.logits());
    if (fp) v += dot(feat, t.penultimate());
    return v;
  };
  auto smooth_model = [&](const MlpModel& m, const Tensor& in) {
    return relu_mask(m, forward(m, in)) == mask0;
  };

  FdStats stats;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    for (int which = 0; which < 2; ++which) {
      const Tensor& param =
          which == 0 ? model.layers[k].weight : model.layers[k].bias;
      const Tensor& analytic =
          which == 0 ? g.layers[k].weight : g.layers[k].bias;
      auto rebuild = [&, k, which](const Tensor& p) {
        MlpModel m = model;
        (which == 0 ? m.layers[k].weight : m.layers[k].bias) = p;
        return m;
      };
      fd_compare(
          param, analytic,
          [&](const Tensor& p) { return objective(rebuild(p), x); },
          [&](const Tensor& p) { return smooth_model(rebuild(p), x); },
          std::string(which == 0 ? "W" : "b") + std::to_string(k), stats,
          max_entries_per_tensor, seed * 31 + k * 2 + which);
    }
  }
  fd_compare(
      x, g.input, [&](const Tensor& in) { return objective(model, in); },
      [&](const Tensor& in) { return smooth_model(model, in); }, "input",
      stats, max_entries_per_tensor, seed * 37);
  return stats;
}

FdStats check_cross_entropy(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t b = 1 + rng.uniform_index(6);
  const std::size_t n = 2 + rng.uniform_index(5);
  const Tensor logits = random_tensor(b, n, 3.0, rng);
  const Tensor target = random_probs(b, n, rng);
  FdStats stats;
  fd_compare(
      logits, softmax_cross_entropy(logits, target).logit_grad,
      [&](const Tensor& z) { return softmax_cross_entropy(z, target).loss; },
      [](const Tensor&) { return true; }, "ce", stats, 1000, seed);
  return stats;
}

FdStats check_distillation_loss(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t b = 1 + rng.uniform_index(6);
  const std::size_t n = 2 + rng.uniform_index(5);
  const Tensor t = random_tensor(b, n, 3.0, rng);
  const Tensor s = random_tensor(b, n, 3.0, rng);
  DistillLossConfig cfg;
  cfg.tau = rng.uniform(0.0, 2.0);
  cfg.temperature = rng.uniform(0.5, 8.0);
  Tensor analytic = distillation_loss(t, s, cfg).per_example_grads;
  // Per-example rows are gradients of each example's own loss; the mean
  // loss sees them divided by B.
  for (double& v : analytic.values()) v /= static_cast<double>(b);
  FdStats stats;
  fd_compare(
      s, analytic,
      [&](const Tensor& z) { return distillation_loss(t, z, cfg).loss; },
      [](const Tensor&) { return true; }, "distill", stats, 1000, seed);
  return stats;
}

FdStats check_student_loss(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t b = 1 + rng.uniform_index(6);
  const std::size_t n = 2 + rng.uniform_index(5);
  const Tensor s = random_tensor(b, n, 3.0, rng);
  const Tensor y = random_tensor(b, n, 3.0, rng);
  FdStats stats;
  fd_compare(
      s, student_loss(s, y).logit_grad,
      [&](const Tensor& z) { return student_loss(z, y).loss; },
      [](const Tensor&) { return true; }, "student", stats, 1000, seed);
  return stats;
}

FdStats check_generator_loss(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t b = 2 + rng.uniform_index(6);
  const std::size_t n = 2 + rng.uniform_index(5);
  const std::size_t h = 1 + rng.uniform_index(8);
  const Tensor s = random_tensor(b, n, 2.0, rng);
  const Tensor f = random_tensor(b, h, 1.0, rng);
  GeneratorLossConfig cfg;
  cfg.alpha = rng.uniform(0.0, 2.0);
  cfg.beta = rng.uniform(0.0, 2.0);
  cfg.feature_sign = rng.uniform() < 0.5 ? FeatureTermSign::kPenalize
                                         : FeatureTermSign::kReward;
  const GeneratorLoss g = generator_loss(s, f, cfg);
  const auto labels = argmax_rows(s);
  FdStats stats;
  fd_compare(
      s, g.logit_grad,
      [&](const Tensor& z) { return generator_loss(z, f, cfg).loss; },
      [&](const Tensor& z) { return argmax_rows(z) == labels; },
      "generator/logits", stats, 1000, seed);
  fd_compare(
      f, g.feature_grad,
      [&](const Tensor& z) { return generator_loss(s, z, cfg).loss; },
      [](const Tensor&) { return true; }, "generator/features", stats, 1000,
      seed + 1);
  return stats;
}

FdStats check_all_backward_shapes(std::uint64_t seed) {
  Rng rng(seed);
  FdStats stats;
  stats.merge(check_backward(teacher_spec(8, 3), 3, seed, false, 40));
  stats.merge(check_backward(student_spec(8, 3), 3, seed + 1, true, 60));
  stats.merge(check_backward(generator_spec(16, 8), 3, seed + 2, false, 40));
  MlpSpec small{1 + rng.uniform_index(5),
                {1 + rng.uniform_index(6)},
                1 + rng.uniform_index(4),
                rng.uniform() < 0.5 ? Activation::kRelu : Activation::kTanh,
                rng.uniform() < 0.5 ? Activation::kIdentity
                                    : Activation::kTanh};
  stats.merge(check_backward(small, 1 + rng.uniform_index(4), seed + 3, true,
                             1000));
  return stats;
}

const BlobFixture& blob_fixture() {
  static const BlobFixture fixture = [] {
    BlobFixture f;
    f.data = make_blobs(BlobSpec{});
    PretrainOptions options;
    options.seed = 0;
    f.teacher = pretrain_teacher(f.data.train, teacher_spec(8, 3), options,
                                 &f.data.test);
    return f;
  }();
  return fixture;
}

}  // namespace dpdfd::testing
