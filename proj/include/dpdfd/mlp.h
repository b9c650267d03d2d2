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

#ifndef DPDFD_MLP_H_
#define DPDFD_MLP_H_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpdfd/rng.h"
#include "dpdfd/tensor.h"

namespace dpdfd {

enum class Activation { kRelu, kTanh, kIdentity };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct Layer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  Activation activation = Activation::kIdentity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  friend bool operator==(const Layer&, const Layer&) = default;
};

struct MlpModel {
  std::vector<Layer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  // Checks layer chaining, tensor shapes and finiteness.
  void validate() const;
  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

// Architecture description used to build fresh models.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 0;
  Activation hidden_activation = Activation::kRelu;
  Activation output_activation = Activation::kIdentity;
};

MlpSpec teacher_spec(std::size_t input_dim, std::size_t classes);
MlpSpec student_spec(std::size_t input_dim, std::size_t classes);
MlpSpec generator_spec(std::size_t noise_dim, std::size_t data_dim);

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpModel make_mlp(const MlpSpec& spec, Rng& rng);

struct ForwardTrace {
  Tensor input;
  std::vector<Tensor> pre_activations;
  std::vector<Tensor> post_activations;

  const Tensor& logits() const { return post_activations.back(); }
  // Input to the final layer (the batch itself for single-layer models).
  const Tensor& penultimate() const;
};

struct LayerGradient {
  Tensor weight;
  Tensor bias;
};

struct Gradients {
  std::vector<LayerGradient> layers;
  Tensor input;
};

ForwardTrace forward(const MlpModel& model, const Tensor& batch);

// Gradients of <logit_grad, logits> with respect to every parameter and the
// input batch. When `feature_grad` is given it is added at the penultimate
// activation, which gives the gradient of
// <logit_grad, logits> + <feature_grad, penultimate>.
Gradients backward(const MlpModel& model, const ForwardTrace& trace,
                   const Tensor& logit_grad,
                   const Tensor* feature_grad = nullptr);

// Row-wise softmax with max-shifting.
Tensor softmax(const Tensor& logits);
Tensor softmax(const Tensor& logits, double temperature);

struct LossAndGrad {
  double loss = 0.0;
  Tensor logit_grad;
};

// Mean over rows of -sum(target * log_softmax(logits)); gradient is
// (softmax(logits) - target) / B.
LossAndGrad softmax_cross_entropy(const Tensor& logits,
                                  const Tensor& target_probs);

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes);
std::vector<std::size_t> argmax_rows(const Tensor& m);

// Returns model with every parameter p replaced by p - lr * grad.
MlpModel sgd_step(const MlpModel& model, const Gradients& grads, double lr);
void sgd_step_in_place(MlpModel& model, const Gradients& grads, double lr);

}  // namespace dpdfd

#endif  // DPDFD_MLP_H_
