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

#ifndef DPDFD_LOSSES_H_
#define DPDFD_LOSSES_H_

#include <string>
#include <string_view>

#include "dpdfd/mlp.h"
#include "dpdfd/tensor.h"

namespace dpdfd {

// Teacher-to-student loss: cross-entropy against the teacher's argmax plus
// tau * KL(softmax(teacher / temp) || softmax(student / temp)). This stands in
// for decoupled KD; the gradient surface handed to the mechanism is the same.
struct DistillLossConfig {
  double tau = 1.0;
  double temperature = 4.0;
};

struct DistillLoss {
  double loss = 0.0;  // mean over the batch
  // Row i is d(loss_i)/d(student_logits_i) for the example's own loss, i.e.
  // B times the gradient of the mean.
  Tensor per_example_grads;
};

DistillLoss distillation_loss(const Tensor& teacher_logits,
                              const Tensor& student_logits,
                              const DistillLossConfig& cfg = {});

// y_s = logits - gamma * g. A vector g is broadcast to every row; a matrix g
// is applied row by row. The result is a plain tensor: nothing downstream
// differentiates through it.
Tensor dp_target(const Tensor& student_logits, const Tensor& sanitized_grad,
                 double gamma);

// Cross-entropy of the student against the fixed soft target softmax(y_s).
LossAndGrad student_loss(const Tensor& student_logits, const Tensor& y_s);

enum class FeatureTermSign {
  kPenalize,  // + beta * mean ||f||
  kReward,    // - beta * mean ||f||
};

std::string_view feature_sign_name(FeatureTermSign s);
FeatureTermSign parse_feature_sign(std::string_view name);

struct GeneratorLossConfig {
  double alpha = 1.0;
  double beta = 1.0;
  FeatureTermSign feature_sign = FeatureTermSign::kPenalize;
  bool use_ce = true;
  bool use_entropy = true;
  bool use_norm = true;

  // Parses "CE+IE+Norm" style term lists.
  void set_terms(std::string_view terms);
  std::string terms() const;
};

struct GeneratorLoss {
  double loss = 0.0;
  double ce = 0.0;
  double entropy = 0.0;  // alpha * sum_c pbar_c log pbar_c
  double norm = 0.0;     // +-beta * mean ||f||
  Tensor logit_grad;
  Tensor feature_grad;
};

// CE against the student's own argmax, alpha times the negative entropy of
// the batch-mean softmax, and the feature-norm term on the penultimate
// activations.
GeneratorLoss generator_loss(const Tensor& student_logits,
                             const Tensor& backbone_features,
                             const GeneratorLossConfig& cfg);

// Entropy (nats) of the batch-mean softmax.
double batch_mean_entropy(const Tensor& logits);

}  // namespace dpdfd

#endif  // DPDFD_LOSSES_H_
