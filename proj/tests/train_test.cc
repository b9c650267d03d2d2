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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>
#include <json.hpp>

#include "dpdfd/errors.h"
#include "dpdfd/train.h"
#include "support/fd.h"

namespace dpdfd {
namespace {

DpConfig small_config() {
  DpConfig cfg;
  cfg.mechanism.noise_scale = 2;
  cfg.mechanism.norm_bound = 1e-3;
  cfg.gamma = 64 / 1e-3;
  cfg.batch = 32;
  cfg.iterations = 20;
  cfg.eval_every = 5;
  return cfg;
}

struct Models {
  MlpModel student;
  MlpModel generator;
};

Models fresh_models(std::uint64_t seed, std::size_t d = 8, std::size_t k = 3) {
  Rng rng(seed);
  Models m;
  m.student = make_mlp(student_spec(d, k), rng);
  m.generator = make_mlp(generator_spec(16, d), rng);
  return m;
}

// Gradients are a fixed function of the student logits; the diagnostics are
// teacher-dependent junk that must never reach an update.
class FakeSource final : public PrivateGradientSource {
 public:
  explicit FakeSource(double junk) : junk_(junk) {}
  SanitizedQuery query(const Tensor& synthetic,
                       const Tensor& student_logits) override {
    ++calls;
    EXPECT_EQ(synthetic.rows(), student_logits.rows());
    SanitizedQuery q;
    q.gradients = student_logits;
    for (double& v : q.gradients.values()) v = 1e-5 * std::tanh(v);
    q.distill_loss = junk_ * calls;
    q.grad_norm = junk_ / calls;
    return q;
  }
  std::size_t input_dim() const override { return 8; }
  std::size_t classes() const override { return 3; }
  int calls = 0;

 private:
  double junk_;
};

TEST(DpConfig, Validation) {
  DpConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.gamma = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.delta = 1;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.epsilon_budget = -1;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.gamma_schedule = StepSchedule::kInvSqrtT;
  cfg.iterations = 400;
  EXPECT_DOUBLE_EQ(cfg.effective_gamma(), cfg.gamma / 20);
}

TEST(Distill, PrivacyPlumbingOnlySanitizedGradientsFlow) {
  const Models m = fresh_models(3);
  DpConfig cfg = small_config();
  FakeSource a(1.0), b(-7.5);
  Rng ra(11), rb(11);
  const TrainReport x = run_distillation(a, m.student, m.generator, cfg, ra);
  const TrainReport y = run_distillation(b, m.student, m.generator, cfg, rb);
  EXPECT_EQ(a.calls, cfg.iterations);
  EXPECT_EQ(x.student, y.student);
  EXPECT_EQ(*x.generator, *y.generator);
  EXPECT_NE(x.records[3].distill_loss, y.records[3].distill_loss);
  EXPECT_NE(x.student, m.student);
}

TEST(Distill, ZeroIterationsLeavesModels) {
  const auto& f = testing::blob_fixture();
  const Models m = fresh_models(5);
  DpConfig cfg = small_config();
  cfg.iterations = 0;
  Rng rng(1);
  const TrainReport r = dpdfd_train(f.teacher.model, m.student, m.generator,
                                    cfg, rng, &f.data.test);
  EXPECT_EQ(r.student, m.student);
  EXPECT_EQ(*r.generator, m.generator);
  EXPECT_EQ(r.epsilon.epsilon, 0.0);
  EXPECT_TRUE(r.records.empty());
}

TEST(Distill, DeterministicReport) {
  const auto& f = testing::blob_fixture();
  const Models m = fresh_models(6);
  const DpConfig cfg = small_config();
  Rng a(42), b(42);
  const TrainReport x =
      dpdfd_train(f.teacher.model, m.student, m.generator, cfg, a, &f.data.test);
  const TrainReport y =
      dpdfd_train(f.teacher.model, m.student, m.generator, cfg, b, &f.data.test);
  EXPECT_EQ(report_to_json(x), report_to_json(y));
  EXPECT_EQ(x.student, y.student);
}

TEST(Distill, ReportShape) {
  const auto& f = testing::blob_fixture();
  const Models m = fresh_models(6);
  const DpConfig cfg = small_config();
  Rng rng(1);
  const TrainReport r =
      dpdfd_train(f.teacher.model, m.student, m.generator, cfg, rng, &f.data.test);
  ASSERT_EQ(r.records.size(), 20u);
  EXPECT_EQ(r.queries, 32 * 20);
  for (std::size_t i = 1; i < r.records.size(); ++i) {
    EXPECT_GE(r.records[i].epsilon, r.records[i - 1].epsilon);
    EXPECT_LE(r.records[i].grad_norm_runmin, r.records[i - 1].grad_norm_runmin);
  }
  EXPECT_TRUE(std::isnan(r.records[0].accuracy));
  EXPECT_FALSE(std::isnan(r.records[4].accuracy));
  const std::string csv = report_to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "iter,L_T,L_S,L_G,acc,eps_spent,gradnorm_runmin");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
  const auto doc = nlohmann::json::parse(report_to_json(r));
  EXPECT_EQ(doc["records"].size(), 20u);
  EXPECT_EQ(doc["accounting"], "scaled");
}

TEST(Distill, BudgetStopsTraining) {
  const auto& f = testing::blob_fixture();
  const Models m = fresh_models(7);
  DpConfig cfg = small_config();
  cfg.mechanism.norm_bound = 4e-3;
  cfg.iterations = 100000;
  cfg.epsilon_budget = 1.0;
  cfg.eval_every = 0;
  AccountingParams p;
  p.norm_bound = 4e-3;
  p.classes = 3;
  p.batch = 32;
  p.noise_scale = 2;
  const auto grid = default_lambda_grid();
  const std::int64_t allowed = max_iterations(1.0, p, grid);
  ASSERT_LT(allowed, 100);
  ASSERT_GT(allowed, 5);
  Rng rng(1);
  const TrainReport r =
      dpdfd_train(f.teacher.model, m.student, m.generator, cfg, rng);
  EXPECT_TRUE(r.stopped_by_budget);
  EXPECT_EQ(r.iterations_run, allowed);
  EXPECT_EQ(static_cast<std::int64_t>(r.records.size()), allowed);
  EXPECT_LE(r.epsilon.epsilon, 1.0);
  EXPECT_EQ(r.queries, allowed * 32);
}

TEST(Distill, InfeasibleBudgetRefusesToStart) {
  const auto& f = testing::blob_fixture();
  const Models m = fresh_models(7);
  DpConfig cfg = small_config();
  cfg.epsilon_budget = 1e-4;
  Rng rng(1);
  EXPECT_THROW(dpdfd_train(f.teacher.model, m.student, m.generator, cfg, rng),
               InfeasibleError);
  EXPECT_EQ(rng.position(), 0u);
  cfg.epsilon_budget = 10;
  cfg.mechanism.noise_scale = 0;
  EXPECT_THROW(dpdfd_train(f.teacher.model, m.student, m.generator, cfg, rng),
               InfeasibleError);
}

TEST(Distill, DimensionChecks) {
  const auto& f = testing::blob_fixture();
  const Models wrong = fresh_models(1, 5, 3);
  Rng rng(1);
  EXPECT_THROW(dpdfd_train(f.teacher.model, wrong.student, wrong.generator,
                           small_config(), rng),
               DimensionError);
}

TEST(Distill, NonPrivateTwoClassBeatsMajority) {
  BlobSpec spec;
  spec.classes = 2;
  spec.seed = 3;
  const DatasetSplit d = make_blobs(spec);
  PretrainOptions po;
  po.seed = 3;
  const PretrainResult teacher =
      pretrain_teacher(d.train, teacher_spec(8, 2), po, &d.test);
  DpConfig cfg;
  cfg.mechanism.noise_scale = 0;
  cfg.mechanism.norm_bound = 1e9;
  cfg.mechanism.stability = 0;
  cfg.gamma = 64 / 1e9;
  cfg.batch = 256;
  cfg.iterations = 500;
  cfg.eval_every = 0;
  const Models m = fresh_models(9, 8, 2);
  Rng rng(9);
  const TrainReport r =
      dpdfd_train(teacher.model, m.student, m.generator, cfg, rng, &d.test);
  EXPECT_GT(r.final_accuracy, majority_baseline(d.test));
  EXPECT_TRUE(std::isinf(r.epsilon.epsilon));
}

TEST(Sources, PerExampleRowsAreBoundedOverB) {
  const auto& f = testing::blob_fixture();
  DpConfig cfg = small_config();
  cfg.mechanism.noise_scale = 0;
  const Models m = fresh_models(2);
  Rng rng(2);
  Tensor x = Tensor::zeros(6, 8);
  for (double& v : x.values()) v = rng.uniform(-1, 1);
  const Tensor s = forward(m.student, x).logits();
  const Tensor g =
      distillation_loss(forward(f.teacher.model, x).logits(), s).per_example_grads;
  TeacherGradientSource per(f.teacher.model, cfg, 1);
  const Tensor rows = per.query(x, s).gradients;
  cfg.aggregation = Aggregation::kBatch;
  TeacherGradientSource batch(f.teacher.model, cfg, 1);
  const Tensor broad = batch.query(x, s).gradients;
  std::vector<double> mean(3, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    const Tensor b = normalize_example(g.row_tensor(i), cfg.mechanism);
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(rows(i, c), b[c] / 6.0);
      mean[c] += b[c];
    }
  }
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(broad(i, c), mean[c] / 6.0);
  }
}

TEST(Ensemble, SingleTeacherNoiselessEqualsNormalizedGradients) {
  const auto& f = testing::blob_fixture();
  DpConfig cfg = small_config();
  cfg.mechanism.noise_scale = 0;
  const Models m = fresh_models(2);
  Rng rng(3);
  Tensor x = Tensor::zeros(5, 8);
  for (double& v : x.values()) v = rng.uniform(-1, 1);
  const Tensor s = forward(m.student, x).logits();
  const Tensor g =
      distillation_loss(forward(f.teacher.model, x).logits(), s).per_example_grads;
  EnsembleSpec one{{f.teacher.model}};
  EnsembleGradientSource src(one, cfg, 1);
  const Tensor out = src.query(x, s).gradients;
  EnsembleSpec two{{f.teacher.model, f.teacher.model}};
  EnsembleGradientSource src2(two, cfg, 1);
  const Tensor out2 = src2.query(x, s).gradients;
  for (std::size_t i = 0; i < 5; ++i) {
    const Tensor b = normalize_example(g.row_tensor(i), cfg.mechanism);
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(out(i, c), b[c]);
      EXPECT_EQ(out2(i, c), b[c]);
    }
  }
}

TEST(Ensemble, NoiseIsPerExampleOverTeacherCount) {
  const auto& f = testing::blob_fixture();
  DpConfig cfg = small_config();
  const Models m = fresh_models(2);
  Tensor x = Tensor::zeros(3, 8);
  const Tensor s = forward(m.student, x).logits();
  DpConfig quiet = cfg;
  quiet.mechanism.noise_scale = 0;
  EnsembleSpec two{{f.teacher.model, f.teacher.model}};
  EnsembleGradientSource noisy(two, cfg, 77);
  EnsembleGradientSource clean(two, quiet, 77);
  const Tensor a = noisy.query(x, s).gradients;
  const Tensor b = clean.query(x, s).gradients;
  NoiseSource z(77);
  const double sd = cfg.mechanism.noise_scale * cfg.mechanism.norm_bound;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i] + sd * z.gaussian() / 2.0, 1e-18);
  }
}

TEST(Ensemble, RejectsMismatchedTeachers) {
  Rng rng(1);
  EnsembleSpec bad{{make_mlp(teacher_spec(8, 3), rng),
                    make_mlp(teacher_spec(8, 4), rng)}};
  EXPECT_THROW(bad.validate(), DimensionError);
  EXPECT_THROW(EnsembleSpec{}.validate(), ValidationError);
}

TEST(DirectDp, FullBatchIsDeterministicPass) {
  const auto& f = testing::blob_fixture();
  DpConfig cfg = small_config();
  cfg.mechanism.noise_scale = 0;
  cfg.batch = static_cast<std::int64_t>(f.data.train.size());
  cfg.iterations = 5;
  Rng init(1);
  const MlpModel model = make_mlp(student_spec(8, 3), init);
  Rng a(100), b(200);
  const TrainReport x = direct_dp_train(f.data.train, model, cfg, a);
  const TrainReport y = direct_dp_train(f.data.train, model, cfg, b);
  EXPECT_EQ(x.student, y.student);
  EXPECT_EQ(x.queries, cfg.batch * 5);
}

TEST(DirectDp, NoiselessMatchesPlainSgd) {
  const auto& f = testing::blob_fixture();
  PretrainOptions po;
  po.seed = 12;
  po.batch = 64;
  po.steps = 2000;
  const PretrainResult plain =
      pretrain_teacher(f.data.train, student_spec(8, 3), po, &f.data.test);
  DpConfig cfg;
  cfg.mechanism.noise_scale = 0;
  cfg.mechanism.norm_bound = 1e9;
  cfg.gamma = 64 / 1e9;
  cfg.batch = 64;
  cfg.iterations = 2000;
  cfg.eval_every = 0;
  Rng rng(12);
  const MlpModel model = make_mlp(student_spec(8, 3), rng);
  const TrainReport r = direct_dp_train(f.data.train, model, cfg, rng, &f.data.test);
  EXPECT_NEAR(r.final_accuracy, *plain.test_accuracy, 0.02);
  EXPECT_EQ(r.algorithm, "dpsgd");
}

TEST(DirectDp, ChargesLikeDistillation) {
  const auto& f = testing::blob_fixture();
  DpConfig cfg = small_config();
  cfg.iterations = 7;
  Rng rng(1);
  const MlpModel model = make_mlp(student_spec(8, 3), rng);
  const TrainReport r = direct_dp_train(f.data.train, model, cfg, rng);
  const Models m = fresh_models(1);
  Rng rng2(1);
  const TrainReport d =
      dpdfd_train(f.teacher.model, m.student, m.generator, cfg, rng2);
  EXPECT_EQ(r.queries, d.queries);
  EXPECT_EQ(r.epsilon.epsilon, d.epsilon.epsilon);
}

TrainReport with_norms(const std::vector<double>& norms) {
  TrainReport r;
  r.gamma = 10;
  r.norm_bound = 0.1;
  r.noise_scale = 1;
  r.classes = 3;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    TrainRecord rec;
    rec.iteration = static_cast<std::int64_t>(i + 1);
    rec.grad_norm = norms[i];
    rec.distill_loss = 1.0;
    r.records.push_back(rec);
  }
  return r;
}

TEST(Convergence, ConstantNormsStall) {
  const ConvergenceSummary s = convergence_monitor(with_norms(std::vector<double>(20, 0.7)));
  for (double v : s.running_min) EXPECT_EQ(v, 0.7);
  EXPECT_TRUE(s.stalled);
  EXPECT_EQ(s.final_to_tenth_ratio, 1.0);
}

TEST(Convergence, DecreasingNormsTrackLastValue) {
  std::vector<double> norms;
  for (int i = 0; i < 50; ++i) norms.push_back(1.0 / (1 + i));
  const ConvergenceSummary s = convergence_monitor(with_norms(norms));
  EXPECT_EQ(s.final_running_min, norms.back());
  EXPECT_FALSE(s.stalled);
  EXPECT_DOUBLE_EQ(s.final_to_tenth_ratio, (1.0 / 50) / (1.0 / 5));
  ASSERT_EQ(s.envelope.size(), 50u);
  EXPECT_GT(s.envelope.front(), s.envelope.back());
}

TEST(Convergence, EmptyReport) {
  const ConvergenceSummary s = convergence_monitor(TrainReport{});
  EXPECT_TRUE(s.running_min.empty());
  EXPECT_FALSE(s.stalled);
}

TEST(LossTerms, DroppingEntropyCollapsesClassBalance) {
  const auto& f = testing::blob_fixture();
  DpConfig cfg;
  cfg.mechanism.noise_scale = 0;
  cfg.mechanism.norm_bound = 1e9;
  cfg.gamma = 64 / 1e9;
  cfg.iterations = 300;
  cfg.eval_every = 0;
  const Models m = fresh_models(4);
  Rng a(4), b(4);
  const TrainReport full =
      dpdfd_train(f.teacher.model, m.student, m.generator, cfg, a);
  cfg.generator.set_terms("CE+Norm");
  const TrainReport no_ie =
      dpdfd_train(f.teacher.model, m.student, m.generator, cfg, b);
  EXPECT_LT(no_ie.synthetic_entropy, full.synthetic_entropy);
}

}  // namespace
}  // namespace dpdfd
