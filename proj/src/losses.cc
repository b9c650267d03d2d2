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

#include "dpdfd/losses.h"

#include <cctype>
#include <cmath>

#include "dpdfd/errors.h"

namespace dpdfd {

namespace {

void require_logit_pair(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(what) + ": logits must be [B x n], got " +
                         a.shape_string());
  }
  require_same_shape(a, b, what);
  require_finite(a, what);
  require_finite(b, what);
}

double log_softmax_at(std::span<const double> z, std::size_t c) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return z[c] - m - std::log(s);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(ch));
  return out;
}

}  // namespace

DistillLoss distillation_loss(const Tensor& teacher_logits,
                              const Tensor& student_logits,
                              const DistillLossConfig& cfg) {
  require_logit_pair(teacher_logits, student_logits, "distillation_loss");
  if (!(cfg.tau >= 0.0) || !(cfg.temperature > 0.0)) {
    throw ValidationError("distillation needs tau >= 0 and temperature > 0");
  }
  const std::size_t rows = student_logits.rows();
  const std::size_t n = student_logits.cols();
  const double temp = cfg.temperature;
  const Tensor p = softmax(student_logits);
  const Tensor q_soft = softmax(student_logits, temp);
  const Tensor p_soft = softmax(teacher_logits, temp);
  const auto labels = argmax_rows(teacher_logits);

  DistillLoss out;
  out.per_example_grads = Tensor::zeros(rows, n);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double li = -log_softmax_at(student_logits.row(i), labels[i]);
    if (cfg.tau > 0.0) {
      double kl = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double pt = p_soft(i, c);
        if (pt > 0.0) kl += pt * (std::log(pt) - std::log(q_soft(i, c)));
      }
      li += cfg.tau * kl;
    }
    total += li;
    auto g = out.per_example_grads.row(i);
    for (std::size_t c = 0; c < n; ++c) {
      g[c] = p(i, c) - (c == labels[i] ? 1.0 : 0.0) +
             cfg.tau * (q_soft(i, c) - p_soft(i, c)) / temp;
    }
  }
  out.loss = total / static_cast<double>(rows);
  return out;
}

Tensor dp_target(const Tensor& student_logits, const Tensor& sanitized_grad,
                 double gamma) {
  if (student_logits.rank() != 2) {
    throw DimensionError("dp_target: logits must be [B x n]");
  }
  if (!std::isfinite(gamma)) throw ValidationError("gamma must be finite");
  Tensor y = student_logits;
  const std::size_t n = student_logits.cols();
  if (sanitized_grad.rank() == 1) {
    if (sanitized_grad.size() != n) {
      throw DimensionError("dp_target: gradient length " +
                           std::to_string(sanitized_grad.size()) +
                           " vs " + std::to_string(n) + " classes");
    }
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto row = y.row(r);
      for (std::size_t c = 0; c < n; ++c) row[c] -= gamma * sanitized_grad[c];
    }
  } else {
    require_same_shape(student_logits, sanitized_grad, "dp_target");
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] -= gamma * sanitized_grad[i];
    }
  }
  require_finite(y, "dp target");
  return y;
}

LossAndGrad student_loss(const Tensor& student_logits, const Tensor& y_s) {
  require_logit_pair(student_logits, y_s, "student_loss");
  return softmax_cross_entropy(student_logits, softmax(y_s));
}

std::string_view feature_sign_name(FeatureTermSign s) {
  return s == FeatureTermSign::kPenalize ? "penalize" : "reward";
}

FeatureTermSign parse_feature_sign(std::string_view name) {
  if (name == "penalize") return FeatureTermSign::kPenalize;
  if (name == "reward") return FeatureTermSign::kReward;
  throw ValidationError("feature term must be penalize or reward, got '" +
                        std::string(name) + "'");
}

void GeneratorLossConfig::set_terms(std::string_view terms) {
  bool ce = false, ie = false, norm = false;
  const std::string all = lower(terms);
  if (all != "none" && !all.empty()) {
    std::size_t start = 0;
    while (start <= all.size()) {
      std::size_t end = all.find('+', start);
      if (end == std::string::npos) end = all.size();
      const std::string tok = all.substr(start, end - start);
      if (tok == "ce") {
        ce = true;
      } else if (tok == "ie") {
        ie = true;
      } else if (tok == "norm") {
        norm = true;
      } else {
        throw ValidationError("unknown loss term '" + tok +
                              "' (expected CE, IE, Norm)");
      }
      start = end + 1;
    }
  }
  use_ce = ce;
  use_entropy = ie;
  use_norm = norm;
}

std::string GeneratorLossConfig::terms() const {
  std::string out;
  auto add = [&](const char* t) {
    if (!out.empty()) out += '+';
    out += t;
  };
  if (use_ce) add("CE");
  if (use_entropy) add("IE");
  if (use_norm) add("Norm");
  return out.empty() ? "none" : out;
}

GeneratorLoss generator_loss(const Tensor& student_logits,
                             const Tensor& backbone_features,
                             const GeneratorLossConfig& cfg) {
  if (student_logits.empty() || backbone_features.empty()) {
    throw ValidationError("generator_loss needs a nonempty batch");
  }
  if (student_logits.rank() != 2 || backbone_features.rank() != 2 ||
      student_logits.rows() != backbone_features.rows()) {
    throw DimensionError("generator_loss: logits " +
                         student_logits.shape_string() + " and features " +
                         backbone_features.shape_string() +
                         " must be matrices with equal rows");
  }
  require_finite(student_logits, "generator logits");
  require_finite(backbone_features, "generator features");
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0)) {
    throw ValidationError("alpha and beta must be nonnegative");
  }
  const std::size_t rows = student_logits.rows();
  const std::size_t n = student_logits.cols();
  const double inv_b = 1.0 / static_cast<double>(rows);

  GeneratorLoss out;
  out.logit_grad = Tensor::zeros(rows, n);
  out.feature_grad = Tensor::zeros(rows, backbone_features.cols());

  if (cfg.use_ce) {
    const auto labels = argmax_rows(student_logits);
    auto ce = softmax_cross_entropy(student_logits, one_hot(labels, n));
    out.ce = ce.loss;
    for (std::size_t i = 0; i < out.logit_grad.size(); ++i) {
      out.logit_grad[i] += ce.logit_grad[i];
    }
  }

  if (cfg.use_entropy && cfg.alpha > 0.0) {
    const Tensor p = softmax(student_logits);
    std::vector<double> pbar(n, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t c = 0; c < n; ++c) pbar[c] += p(i, c) * inv_b;
    }
    std::vector<double> h(n, 0.0);
    double neg_entropy = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (pbar[c] > 0.0) {
        h[c] = std::log(pbar[c]);
        neg_entropy += pbar[c] * h[c];
      }
    }
    out.entropy = cfg.alpha * neg_entropy;
    for (std::size_t i = 0; i < rows; ++i) {
      double mean_h = 0.0;
      for (std::size_t c = 0; c < n; ++c) mean_h += p(i, c) * h[c];
      for (std::size_t k = 0; k < n; ++k) {
        out.logit_grad(i, k) += cfg.alpha * inv_b * p(i, k) * (h[k] - mean_h);
      }
    }
  }

  if (cfg.use_norm && cfg.beta > 0.0) {
    const double sign =
        cfg.feature_sign == FeatureTermSign::kPenalize ? 1.0 : -1.0;
    double mean_norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      auto f = backbone_features.row(i);
      const double norm = l2_norm(f);
      mean_norm += norm * inv_b;
      if (norm > 0.0) {
        auto g = out.feature_grad.row(i);
        const double scale = sign * cfg.beta * inv_b / norm;
        for (std::size_t j = 0; j < f.size(); ++j) g[j] = scale * f[j];
      }
    }
    out.norm = sign * cfg.beta * mean_norm;
  }

  out.loss = out.ce + out.entropy + out.norm;
  return out;
}

double batch_mean_entropy(const Tensor& logits) {
  if (logits.empty()) throw ValidationError("entropy of an empty batch");
  const Tensor p = softmax(logits);
  const std::size_t rows = logits.rows();
  const std::size_t n = logits.cols();
  double h = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    double pbar = 0.0;
    for (std::size_t i = 0; i < rows; ++i) pbar += p(i, c);
    pbar /= static_cast<double>(rows);
    if (pbar > 0.0) h -= pbar * std::log(pbar);
  }
  return h;
}

}  // namespace dpdfd
