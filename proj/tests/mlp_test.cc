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

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "dpdfd/checkpoint.h"
#include "dpdfd/errors.h"
#include "dpdfd/mlp.h"
#include "support/fd.h"

namespace dpdfd {
namespace {

MlpModel single_layer(std::vector<double> w, std::size_t out, std::size_t in,
                      std::vector<double> b, Activation a) {
  MlpModel m;
  m.layers.push_back({Tensor::matrix(out, in, std::move(w)),
                      Tensor::vector(std::move(b)), a});
  return m;
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  EXPECT_THROW(Tensor({0, 2}), DimensionError);
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 2), 6.0);
  EXPECT_EQ(t.shape_string(), "[2x3]");
}

TEST(Tensor, StackAndSplitRoundTrip) {
  const Tensor m = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  const auto rows = split_rows(m);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(stack_rows(rows), m);
}

TEST(Forward, IdentityLayer) {
  const MlpModel m =
      single_layer({1, 0, 0, 1}, 2, 2, {0, 0}, Activation::kIdentity);
  const ForwardTrace t = forward(m, Tensor::matrix(1, 2, {3, 4}));
  EXPECT_EQ(t.logits(), Tensor::matrix(1, 2, {3, 4}));
}

TEST(Forward, ReluKillsNegativePreActivation) {
  const MlpModel m = single_layer({2}, 1, 1, {1}, Activation::kRelu);
  const ForwardTrace t = forward(m, Tensor::matrix(1, 1, {-5}));
  EXPECT_EQ(t.pre_activations[0](0, 0), -9.0);
  EXPECT_EQ(t.logits()(0, 0), 0.0);
}

TEST(Forward, MatchesStraightLineArithmetic) {
  Rng rng(42);
  const MlpModel m = make_mlp({5, {7}, 3}, rng);
  Tensor x = Tensor::zeros(4, 5);
  for (double& v : x.values()) v = rng.gaussian();
  const Tensor logits = forward(m, x).logits();
  const Layer& l1 = m.layers[0];
  const Layer& l2 = m.layers[1];
  for (std::size_t r = 0; r < 4; ++r) {
    double h[7];
    for (int j = 0; j < 7; ++j) {
      double s = l1.bias[j];
      for (int i = 0; i < 5; ++i) s += l1.weight(j, i) * x(r, i);
      h[j] = s > 0 ? s : 0;
    }
    for (int c = 0; c < 3; ++c) {
      double s = l2.bias[c];
      for (int j = 0; j < 7; ++j) s += l2.weight(c, j) * h[j];
      EXPECT_NEAR(logits(r, c), s, 1e-12);
    }
  }
}

TEST(Forward, Errors) {
  const MlpModel m = single_layer({1, 0, 0, 1}, 2, 2, {0, 0},
                                  Activation::kIdentity);
  EXPECT_THROW(forward(m, Tensor::matrix(1, 3, {1, 2, 3})), DimensionError);
  EXPECT_THROW(forward(m, Tensor::matrix(1, 2, {1, NAN})), ValidationError);
}

TEST(Forward, Deterministic) {
  Rng a(7), b(7);
  const MlpModel m1 = make_mlp(teacher_spec(8, 3), a);
  const MlpModel m2 = make_mlp(teacher_spec(8, 3), b);
  ASSERT_EQ(m1, m2);
  Tensor x = Tensor::zeros(5, 8);
  for (double& v : x.values()) v = a.uniform(-1, 1);
  const ForwardTrace t1 = forward(m1, x);
  const ForwardTrace t2 = forward(m1, x);
  EXPECT_EQ(t1.logits(), t2.logits());
  const Tensor g(t1.logits().shape(), std::vector<double>(15, 0.3));
  const Gradients g1 = backward(m1, t1, g);
  const Gradients g2 = backward(m1, t2, g);
  for (std::size_t k = 0; k < m1.layers.size(); ++k) {
    EXPECT_EQ(g1.layers[k].weight, g2.layers[k].weight);
  }
  EXPECT_EQ(g1.input, g2.input);
}

TEST(Backward, SingleIdentityLayer) {
  const MlpModel m =
      single_layer({1, 2, 3, 4, 5, 6}, 2, 3, {0, 0}, Activation::kIdentity);
  const Tensor x = Tensor::matrix(1, 3, {1, -1, 2});
  const Tensor g = Tensor::matrix(1, 2, {0.5, -2});
  const Gradients grads = backward(m, forward(m, x), g);
  // g^T x
  EXPECT_EQ(grads.layers[0].weight,
            Tensor::matrix(2, 3, {0.5, -0.5, 1.0, -2, 2, -4}));
  EXPECT_EQ(grads.layers[0].bias, Tensor::vector({0.5, -2}));
  // W^T g
  EXPECT_EQ(grads.input, Tensor::matrix(1, 3, {0.5 - 8, 1 - 10, 1.5 - 12}));
}

TEST(Backward, ZeroUpstreamGivesZero) {
  Rng rng(3);
  const MlpModel m = make_mlp(teacher_spec(4, 3), rng);
  Tensor x = Tensor::zeros(2, 4);
  for (double& v : x.values()) v = rng.gaussian();
  const Gradients g = backward(m, forward(m, x), Tensor::zeros(2, 3));
  for (const auto& l : g.layers) {
    for (double v : l.weight.values()) EXPECT_EQ(v, 0.0);
    for (double v : l.bias.values()) EXPECT_EQ(v, 0.0);
  }
  for (double v : g.input.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, TraceMismatchIsValidationError) {
  Rng rng(3);
  const MlpModel a = make_mlp(teacher_spec(4, 3), rng);
  const MlpModel b = make_mlp(student_spec(4, 3), rng);
  const Tensor x = Tensor::zeros(2, 4);
  EXPECT_THROW(backward(b, forward(a, x), Tensor::zeros(2, 3)),
               ValidationError);
  EXPECT_THROW(backward(a, forward(a, x), Tensor::zeros(2, 2)),
               ValidationError);
}

TEST(Backward, FiniteDifferencesOverHundredSeeds) {
  testing::FdStats stats;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    stats.merge(testing::check_all_backward_shapes(seed));
  }
  EXPECT_EQ(stats.failed, 0u) << stats.first_failure;
  EXPECT_GT(stats.checked, 10000u);
  EXPECT_LT(stats.skipped, stats.checked / 100);
}

TEST(CrossEntropy, SymmetricCase) {
  const LossAndGrad r = softmax_cross_entropy(Tensor::matrix(1, 2, {0, 0}),
                                              Tensor::matrix(1, 2, {0.5, 0.5}));
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  EXPECT_EQ(r.logit_grad, Tensor::matrix(1, 2, {0, 0}));
}

TEST(CrossEntropy, SaturatedIsStable) {
  const LossAndGrad r = softmax_cross_entropy(Tensor::matrix(1, 2, {1000, 0}),
                                              Tensor::matrix(1, 2, {1, 0}));
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
  EXPECT_TRUE(r.logit_grad.all_finite());
}

TEST(CrossEntropy, NeverNonFiniteUpToMillion) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    Tensor z = Tensor::zeros(3, 4);
    for (double& v : z.values()) v = rng.uniform(-1e6, 1e6);
    Tensor t = Tensor::zeros(3, 4);
    for (std::size_t r = 0; r < 3; ++r) t(r, rng.uniform_index(4)) = 1.0;
    const LossAndGrad res = softmax_cross_entropy(z, t);
    ASSERT_TRUE(std::isfinite(res.loss));
    ASSERT_TRUE(res.logit_grad.all_finite());
  }
}

TEST(CrossEntropy, FiniteDifferences) {
  testing::FdStats stats;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    stats.merge(testing::check_cross_entropy(seed));
  }
  EXPECT_EQ(stats.failed, 0u) << stats.first_failure;
}

TEST(CrossEntropy, ShapeMismatch) {
  EXPECT_THROW(softmax_cross_entropy(Tensor::zeros(1, 2), Tensor::zeros(1, 3)),
               DimensionError);
}

TEST(Sgd, ZeroRateLeavesModel) {
  Rng rng(5);
  const MlpModel m = make_mlp(student_spec(4, 3), rng);
  Tensor x = Tensor::zeros(2, 4);
  for (double& v : x.values()) v = rng.gaussian();
  const ForwardTrace t = forward(m, x);
  const Gradients g = backward(m, t, Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(sgd_step(m, g, 0.0), m);
}

TEST(Sgd, SingleWeightArithmetic) {
  const MlpModel m = single_layer({1.0}, 1, 1, {0.0}, Activation::kIdentity);
  Gradients g;
  g.layers.push_back({Tensor::matrix(1, 1, {0.5}), Tensor::vector({0.0})});
  EXPECT_EQ(sgd_step(m, g, 0.1).layers[0].weight[0], 0.95);
}

TEST(Sgd, TwoStepsEqualOneSummedStep) {
  Rng rng(9);
  const MlpModel m = make_mlp(student_spec(3, 2), rng);
  Tensor x = Tensor::zeros(2, 3);
  for (double& v : x.values()) v = rng.gaussian();
  const Gradients g =
      backward(m, forward(m, x), Tensor::matrix(2, 2, {0.25, -0.5, 1, 0.75}));
  const MlpModel twice = sgd_step(sgd_step(m, g, 0.125), g, 0.125);
  const MlpModel once = sgd_step(m, g, 0.25);
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    for (std::size_t i = 0; i < m.layers[k].weight.size(); ++i) {
      EXPECT_NEAR(twice.layers[k].weight[i], once.layers[k].weight[i], 1e-15);
    }
  }
}

TEST(Sgd, ShapeMismatchIsValidationError) {
  Rng rng(9);
  MlpModel m = make_mlp(student_spec(3, 2), rng);
  Gradients g;
  EXPECT_THROW(sgd_step(m, g, 0.1), ValidationError);
  EXPECT_THROW(sgd_step(m, g, -0.1), ValidationError);
}

TEST(Init, GlorotRange) {
  Rng rng(1);
  const MlpModel m = make_mlp(teacher_spec(8, 3), rng);
  for (const Layer& l : m.layers) {
    const double lim =
        std::sqrt(6.0 / static_cast<double>(l.in_dim() + l.out_dim()));
    for (double w : l.weight.values()) EXPECT_LE(std::abs(w), lim);
    for (double b : l.bias.values()) EXPECT_EQ(b, 0.0);
  }
  EXPECT_EQ(m.layers.back().activation, Activation::kIdentity);
  EXPECT_EQ(m.parameter_count(), 8u * 64 + 64 + 64 * 64 + 64 + 64 * 3 + 3);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(77);
  MlpModel m = make_mlp(generator_spec(16, 8), rng);
  m.layers[0].weight[0] = 0.1 + 0.2;  // not representable as a short decimal
  m.layers[1].bias[3] = -1e-300;
  const MlpModel back = model_from_json(model_to_json(m));
  EXPECT_EQ(back, m);
  const auto path =
      std::filesystem::temp_directory_path() / "dpdfd_ckpt_test.json";
  save_model(m, path);
  EXPECT_EQ(load_model(path), m);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsGarbage) {
  EXPECT_THROW(model_from_json("not json"), IoError);
  EXPECT_THROW(model_from_json(R"({"format":"other"})"), IoError);
  EXPECT_THROW(load_model("/nonexistent/dpdfd.json"), IoError);
}

}  // namespace
}  // namespace dpdfd
