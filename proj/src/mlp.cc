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

#include "dpdfd/mlp.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpdfd/errors.h"

namespace dpdfd {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::size_t MlpModel::input_dim() const {
  return layers.empty() ? 0 : layers.front().in_dim();
}

std::size_t MlpModel::output_dim() const {
  return layers.empty() ? 0 : layers.back().out_dim();
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpModel::validate() const {
  if (layers.empty()) throw ValidationError("model has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& l = layers[k];
    if (l.weight.rank() != 2) {
      throw ValidationError("layer " + std::to_string(k) +
                            " weight must be a matrix");
    }
    if (l.bias.rank() != 1 || l.bias.size() != l.out_dim()) {
      throw ValidationError("layer " + std::to_string(k) +
                            " bias length does not match weight rows");
    }
    if (k > 0 && layers[k - 1].out_dim() != l.in_dim()) {
      throw ValidationError("layer " + std::to_string(k) + " expects " +
                            std::to_string(l.in_dim()) + " inputs, previous "
                            "layer gives " +
                            std::to_string(layers[k - 1].out_dim()));
    }
    if (!l.weight.all_finite() || !l.bias.all_finite()) {
      throw ValidationError("layer " + std::to_string(k) +
                            " has non-finite parameters");
    }
  }
}

MlpSpec teacher_spec(std::size_t input_dim, std::size_t classes) {
  return {input_dim, {64, 64}, classes, Activation::kRelu,
          Activation::kIdentity};
}

MlpSpec student_spec(std::size_t input_dim, std::size_t classes) {
  return {input_dim, {32}, classes, Activation::kRelu, Activation::kIdentity};
}

MlpSpec generator_spec(std::size_t noise_dim, std::size_t data_dim) {
  return {noise_dim, {64, 64}, data_dim, Activation::kRelu, Activation::kTanh};
}

MlpModel make_mlp(const MlpSpec& spec, Rng& rng) {
  if (spec.input_dim == 0 || spec.output_dim == 0) {
    throw ValidationError("model dimensions must be positive");
  }
  std::vector<std::size_t> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(spec.output_dim);
  MlpModel model;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t in = dims[k];
    const std::size_t out = dims[k + 1];
    if (out == 0) throw ValidationError("hidden width must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Layer layer;
    layer.weight = Tensor::zeros(out, in);
    for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
    layer.bias = Tensor({out});
    layer.activation = k + 2 == dims.size() ? spec.output_activation
                                            : spec.hidden_activation;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

const Tensor& ForwardTrace::penultimate() const {
  return post_activations.size() < 2
             ? input
             : post_activations[post_activations.size() - 2];
}

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kIdentity:
      return x;
  }
  return x;
}

// Derivative expressed through the pre-activation x and output y.
double activate_grad(Activation a, double x, double y) {
  switch (a) {
    case Activation::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

ForwardTrace forward(const MlpModel& model, const Tensor& batch) {
  if (model.layers.empty()) throw ValidationError("model has no layers");
  require_matrix(batch, model.input_dim(), "forward input");
  require_finite(batch, "forward input");
  ForwardTrace trace;
  trace.input = batch;
  const std::size_t rows = batch.rows();
  const Tensor* x = &trace.input;
  for (const Layer& layer : model.layers) {
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();
    if (x->cols() != in) {
      throw DimensionError("layer expects " + std::to_string(in) +
                           " inputs, got " + std::to_string(x->cols()));
    }
    Tensor pre = Tensor::zeros(rows, out);
    Tensor post = Tensor::zeros(rows, out);
    for (std::size_t r = 0; r < rows; ++r) {
      auto xr = x->row(r);
      for (std::size_t o = 0; o < out; ++o) {
        auto w = layer.weight.row(o);
        double s = layer.bias[o];
        for (std::size_t i = 0; i < in; ++i) s += w[i] * xr[i];
        pre(r, o) = s;
        post(r, o) = activate(layer.activation, s);
      }
    }
    trace.pre_activations.push_back(std::move(pre));
    trace.post_activations.push_back(std::move(post));
    x = &trace.post_activations.back();
  }
  return trace;
}

Gradients backward(const MlpModel& model, const ForwardTrace& trace,
                   const Tensor& logit_grad, const Tensor* feature_grad) {
  const std::size_t depth = model.layers.size();
  if (trace.pre_activations.size() != depth ||
      trace.post_activations.size() != depth) {
    throw ValidationError("trace has " +
                          std::to_string(trace.post_activations.size()) +
                          " layers, model has " + std::to_string(depth));
  }
  for (std::size_t k = 0; k < depth; ++k) {
    const Tensor& post = trace.post_activations[k];
    if (post.rank() != 2 || post.cols() != model.layers[k].out_dim()) {
      throw ValidationError("trace does not match model at layer " +
                            std::to_string(k));
    }
  }
  if (logit_grad.shape() != trace.logits().shape()) {
    throw ValidationError("logit gradient shape " + logit_grad.shape_string() +
                          " does not match logits " +
                          trace.logits().shape_string());
  }
  if (feature_grad && feature_grad->shape() != trace.penultimate().shape()) {
    throw ValidationError("feature gradient shape " +
                          feature_grad->shape_string() +
                          " does not match features " +
                          trace.penultimate().shape_string());
  }

  const std::size_t rows = logit_grad.rows();
  Gradients grads;
  grads.layers.resize(depth);
  Tensor upstream = logit_grad;  // d/d(post) of layer k
  for (std::size_t kk = depth; kk-- > 0;) {
    const Layer& layer = model.layers[kk];
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();
    const Tensor& pre = trace.pre_activations[kk];
    const Tensor& post = trace.post_activations[kk];
    const Tensor& x = kk == 0 ? trace.input : trace.post_activations[kk - 1];

    Tensor delta = Tensor::zeros(rows, out);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        delta(r, o) = upstream(r, o) *
                      activate_grad(layer.activation, pre(r, o), post(r, o));
      }
    }
    LayerGradient& lg = grads.layers[kk];
    lg.weight = Tensor::zeros(out, in);
    lg.bias = Tensor({out});
    Tensor down = Tensor::zeros(rows, in);
    for (std::size_t r = 0; r < rows; ++r) {
      auto xr = x.row(r);
      auto dr = down.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        lg.bias[o] += d;
        auto gw = lg.weight.row(o);
        auto w = layer.weight.row(o);
        for (std::size_t i = 0; i < in; ++i) {
          gw[i] += d * xr[i];
          dr[i] += d * w[i];
        }
      }
    }
    if (kk + 1 == depth && feature_grad) {
      for (std::size_t i = 0; i < down.size(); ++i) {
        down[i] += (*feature_grad)[i];
      }
    }
    upstream = std::move(down);
  }
  grads.input = std::move(upstream);
  return grads;
}

Tensor softmax(const Tensor& logits) { return softmax(logits, 1.0); }

Tensor softmax(const Tensor& logits, double temperature) {
  if (!(temperature > 0.0)) {
    throw ValidationError("softmax temperature must be positive");
  }
  Tensor out = logits;
  const std::size_t rows = logits.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row(r);
    double m = -std::numeric_limits<double>::infinity();
    for (double& v : row) {
      v /= temperature;
      m = std::max(m, v);
    }
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : row) v /= s;
  }
  return out;
}

LossAndGrad softmax_cross_entropy(const Tensor& logits,
                                  const Tensor& target_probs) {
  require_same_shape(logits, target_probs, "softmax_cross_entropy");
  if (logits.empty()) throw ValidationError("empty batch");
  const std::size_t rows = logits.rows();
  const double inv_b = 1.0 / static_cast<double>(rows);
  LossAndGrad out;
  out.logit_grad = logits;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    auto z = logits.row(r);
    auto t = target_probs.row(r);
    auto g = out.logit_grad.row(r);
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < z.size(); ++c) {
      if (t[c] != 0.0) total -= t[c] * (z[c] - lse);
      g[c] = (std::exp(z[c] - lse) - t[c]) * inv_b;
    }
  }
  out.loss = total * inv_b;
  return out;
}

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
  if (labels.empty()) throw ValidationError("one_hot of an empty label list");
  Tensor out = Tensor::zeros(labels.size(), classes);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= classes) {
      throw ValidationError("label " + std::to_string(labels[r]) +
                            " out of range for " + std::to_string(classes) +
                            " classes");
    }
    out(r, labels[r]) = 1.0;
  }
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor& m) {
  std::vector<std::size_t> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    out[r] = static_cast<std::size_t>(
        std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

void sgd_step_in_place(MlpModel& model, const Gradients& grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ValidationError("learning rate must be finite and nonnegative");
  }
  if (grads.layers.size() != model.layers.size()) {
    throw ValidationError("gradient has " +
                          std::to_string(grads.layers.size()) +
                          " layers, model has " +
                          std::to_string(model.layers.size()));
  }
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    Layer& l = model.layers[k];
    const LayerGradient& g = grads.layers[k];
    if (g.weight.shape() != l.weight.shape() ||
        g.bias.shape() != l.bias.shape()) {
      throw ValidationError("gradient shape mismatch at layer " +
                            std::to_string(k));
    }
  }
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    Layer& l = model.layers[k];
    const LayerGradient& g = grads.layers[k];
    for (std::size_t i = 0; i < l.weight.size(); ++i) {
      l.weight[i] -= lr * g.weight[i];
    }
    for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] -= lr * g.bias[i];
  }
}

MlpModel sgd_step(const MlpModel& model, const Gradients& grads, double lr) {
  MlpModel out = model;
  sgd_step_in_place(out, grads, lr);
  return out;
}

}  // namespace dpdfd
