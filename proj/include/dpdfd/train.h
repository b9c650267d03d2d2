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

#ifndef DPDFD_TRAIN_H_
#define DPDFD_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpdfd/accountant.h"
#include "dpdfd/datasets.h"
#include "dpdfd/losses.h"
#include "dpdfd/mechanism.h"
#include "dpdfd/mlp.h"
#include "dpdfd/rng.h"

namespace dpdfd {

// How bounded per-example gradients are combined before they move the
// student's logits.
//   kPerExample: row i gets (bound(g_i) + z_i) / B, one noise draw per row.
//   kBatch:      every row gets (sum_i bound(g_i) + z) / B.
enum class Aggregation { kPerExample, kBatch };

std::string_view aggregation_name(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

enum class StepSchedule {
  kConstant,
  kInvSqrtT,  // gamma / sqrt(T) for the whole run
};

std::string_view schedule_name(StepSchedule s);
StepSchedule parse_schedule(std::string_view name);

struct DpConfig {
  MechanismConfig mechanism;
  Aggregation aggregation = Aggregation::kPerExample;
  double gamma = 64.0 / 1e-3;  // DP-target step
  StepSchedule gamma_schedule = StepSchedule::kConstant;
  double gamma_student = 1.0;
  double gamma_generator = 0.01;
  std::int64_t batch = 256;
  std::int64_t iterations = 2000;
  double delta = 1e-5;
  std::optional<double> epsilon_budget;
  AccountingMode accounting = AccountingMode::kScaled;
  DistillLossConfig distill;
  GeneratorLossConfig generator;
  std::size_t noise_dim = 16;
  // Held-out accuracy is evaluated every `eval_every` iterations and on the
  // last one; 0 disables it.
  std::int64_t eval_every = 1;

  void validate() const;
  double effective_gamma() const;
};

struct TrainRecord {
  std::int64_t iteration = 0;
  double distill_loss = 0.0;     // L_T
  double student_loss = 0.0;     // L_S
  double generator_loss = 0.0;   // L_G
  double accuracy = 0.0;         // NaN when not evaluated
  double epsilon = 0.0;          // spent so far
  double grad_norm = 0.0;        // mean per-example ||g_i|| before bounding
  double grad_norm_runmin = 0.0;
};

struct TrainReport {
  std::string algorithm;
  std::vector<TrainRecord> records;
  MlpModel student;
  std::optional<MlpModel> generator;

  std::int64_t iterations_requested = 0;
  std::int64_t iterations_run = 0;
  bool stopped_by_budget = false;
  std::int64_t queries = 0;
  EpsilonResult epsilon;  // +inf when sigma == 0
  double delta = 0.0;
  std::optional<double> epsilon_budget;
  AccountingMode accounting = AccountingMode::kScaled;

  // Mechanism settings the convergence envelope needs.
  double gamma = 0.0;
  double norm_bound = 0.0;
  double noise_scale = 0.0;
  std::size_t classes = 0;

  double final_accuracy = 0.0;      // NaN without an eval set
  double synthetic_entropy = 0.0;   // batch-mean softmax entropy, NaN if n/a
};

std::string report_to_json(const TrainReport& report);
// Columns: iter,L_T,L_S,L_G,acc,eps_spent,gradnorm_runmin
std::string report_to_csv(const TrainReport& report);

// What the training loop receives from the private side for one synthetic
// batch: a [B x n] matrix of sanitized gradients. `distill_loss` and
// `grad_norm` are report-only diagnostics and never feed an update.
struct SanitizedQuery {
  Tensor gradients;
  double distill_loss = 0.0;
  double grad_norm = 0.0;
};

// The only path from teacher models to the student and generator.
class PrivateGradientSource {
 public:
  virtual ~PrivateGradientSource() = default;
  virtual SanitizedQuery query(const Tensor& synthetic,
                               const Tensor& student_logits) = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t classes() const = 0;
};

// Single teacher: per-example L_T gradients, bounded, noised and combined
// according to `aggregation` with divisor B.
class TeacherGradientSource final : public PrivateGradientSource {
 public:
  TeacherGradientSource(const MlpModel& teacher, const DpConfig& cfg,
                        std::uint64_t noise_seed);
  SanitizedQuery query(const Tensor& synthetic,
                       const Tensor& student_logits) override;
  std::size_t input_dim() const override { return teacher_.input_dim(); }
  std::size_t classes() const override { return teacher_.output_dim(); }

 private:
  const MlpModel& teacher_;
  DpConfig cfg_;
  NoiseSource noise_;
};

struct EnsembleSpec {
  std::vector<MlpModel> teachers;
  void validate() const;
};

// Several teachers: for each example the bounded gradients of every teacher
// are summed, one noise vector is added and the result is divided by the
// teacher count.
class EnsembleGradientSource final : public PrivateGradientSource {
 public:
  EnsembleGradientSource(const EnsembleSpec& ensemble, const DpConfig& cfg,
                         std::uint64_t noise_seed);
  SanitizedQuery query(const Tensor& synthetic,
                       const Tensor& student_logits) override;
  std::size_t input_dim() const override;
  std::size_t classes() const override;

 private:
  const EnsembleSpec& ensemble_;
  DpConfig cfg_;
  NoiseSource noise_;
};

// Student/generator alternation shared by the single- and multi-teacher
// procedures.
TrainReport run_distillation(PrivateGradientSource& source, MlpModel student,
                             MlpModel generator, const DpConfig& cfg, Rng& rng,
                             const LabeledDataset* eval = nullptr);

TrainReport dpdfd_train(const MlpModel& teacher, MlpModel student,
                        MlpModel generator, const DpConfig& cfg, Rng& rng,
                        const LabeledDataset* eval = nullptr);

TrainReport multi_model_train(const EnsembleSpec& ensemble, MlpModel student,
                              MlpModel generator, const DpConfig& cfg,
                              Rng& rng, const LabeledDataset* eval = nullptr);

// Training on private labeled data: Poisson sampling with rate B/N, the same
// bound-and-noise step on output gradients, no generator.
TrainReport direct_dp_train(const LabeledDataset& data, MlpModel model,
                            const DpConfig& cfg, Rng& rng,
                            const LabeledDataset* eval = nullptr);

struct ConvergenceOptions {
  double smoothness = 1.0;  // kappa
  double loss_floor = 0.0;  // L_*
};

struct ConvergenceSummary {
  std::vector<double> running_min;
  // sqrt((2 (L0 - L*) + 2 t kappa gamma^2 C^2 (1 + sigma^2 d)) / (t gamma C))
  // for t = 1..T with d = n; shape only, for plotting.
  std::vector<double> envelope;
  // Running minimum did not decrease over the final half of training.
  bool stalled = false;
  double final_running_min = 0.0;
  // running_min[T-1] / running_min[T/10 - 1]; NaN for T < 10.
  double final_to_tenth_ratio = 0.0;
};

ConvergenceSummary convergence_monitor(const TrainReport& report,
                                       const ConvergenceOptions& options = {});

}  // namespace dpdfd

#endif  // DPDFD_TRAIN_H_
