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

#include "dpdfd/train.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "dpdfd/errors.h"

namespace dpdfd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_row_norm(const Tensor& m) {
  double s = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) s += l2_norm(m.row(r));
  return s / static_cast<double>(m.rows());
}

Tensor broadcast_rows(const Tensor& v, std::size_t rows) {
  Tensor out = Tensor::zeros(rows, v.size());
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(v.values().begin(), v.values().end(), out.row(r).begin());
  }
  return out;
}

Tensor gaussian_batch(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor out = Tensor::zeros(rows, cols);
  for (double& v : out.values()) v = rng.gaussian();
  return out;
}

AccountingParams accounting_params(const DpConfig& cfg, std::size_t classes) {
  AccountingParams p;
  p.norm_bound = cfg.mechanism.norm_bound;
  p.classes = static_cast<std::int64_t>(classes);
  p.batch = cfg.batch;
  p.iterations = cfg.iterations;
  p.noise_scale = cfg.mechanism.noise_scale;
  p.delta = cfg.delta;
  p.mode = cfg.accounting;
  return p;
}

// Iterations the budget allows, capped at cfg.iterations. Throws
// InfeasibleError when the budget cannot pay for a single iteration.
std::int64_t affordable_iterations(const DpConfig& cfg, std::size_t classes,
                                   const std::vector<double>& grid) {
  if (!cfg.epsilon_budget || cfg.iterations == 0) return cfg.iterations;
  if (cfg.mechanism.noise_scale == 0.0) {
    throw InfeasibleError(
        "sigma = 0 gives no privacy; no finite epsilon budget is feasible");
  }
  const std::int64_t cap = max_iterations(
      *cfg.epsilon_budget, accounting_params(cfg, classes), grid);
  return std::min(cap, cfg.iterations);
}

void init_report(TrainReport& report, const DpConfig& cfg,
                 std::size_t classes, std::int64_t planned) {
  report.iterations_requested = cfg.iterations;
  report.stopped_by_budget = planned < cfg.iterations;
  report.delta = cfg.delta;
  report.epsilon_budget = cfg.epsilon_budget;
  report.accounting = cfg.accounting;
  report.gamma = cfg.effective_gamma();
  report.norm_bound = cfg.mechanism.norm_bound;
  report.noise_scale = cfg.mechanism.noise_scale;
  report.classes = classes;
}

void finish_record(TrainRecord& rec, TrainReport& report,
                   const PrivacyLedger& ledger, double delta) {
  rec.epsilon = ledger.epsilon(delta).epsilon;
  rec.grad_norm_runmin =
      report.records.empty()
          ? rec.grad_norm
          : std::min(report.records.back().grad_norm_runmin, rec.grad_norm);
  report.records.push_back(rec);
}

void check_budget(const TrainReport& report) {
  if (report.epsilon_budget && report.epsilon.epsilon > *report.epsilon_budget) {
    throw NumericalError("spent epsilon exceeds the budget");
  }
}

bool eval_due(std::int64_t t, std::int64_t last, std::int64_t every) {
  return every > 0 && (t % every == 0 || t == last);
}

}  // namespace

std::string_view aggregation_name(Aggregation a) {
  return a == Aggregation::kPerExample ? "per_example" : "batch";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "per_example") return Aggregation::kPerExample;
  if (name == "batch") return Aggregation::kBatch;
  throw ValidationError("aggregation must be per_example or batch, got '" +
                        std::string(name) + "'");
}

std::string_view schedule_name(StepSchedule s) {
  return s == StepSchedule::kConstant ? "constant" : "inv_sqrt_T";
}

StepSchedule parse_schedule(std::string_view name) {
  if (name == "constant") return StepSchedule::kConstant;
  if (name == "inv_sqrt_T") return StepSchedule::kInvSqrtT;
  throw ValidationError("schedule must be constant or inv_sqrt_T, got '" +
                        std::string(name) + "'");
}

void DpConfig::validate() const {
  mechanism.validate();
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string(what) + " must be positive and finite");
    }
  };
  positive(gamma, "gamma");
  positive(gamma_student, "student learning rate");
  positive(gamma_generator, "generator learning rate");
  if (batch < 1) throw ValidationError("batch must be at least 1");
  if (iterations < 0) throw ValidationError("iterations must be nonnegative");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ValidationError("delta must lie in (0, 1)");
  }
  if (epsilon_budget) positive(*epsilon_budget, "epsilon budget");
  if (!(generator.alpha >= 0.0) || !(generator.beta >= 0.0) ||
      !std::isfinite(generator.alpha) || !std::isfinite(generator.beta)) {
    throw ValidationError("alpha and beta must be nonnegative and finite");
  }
  if (!(distill.tau >= 0.0) || !(distill.temperature > 0.0)) {
    throw ValidationError("distillation needs tau >= 0 and temperature > 0");
  }
  if (noise_dim < 1) throw ValidationError("noise_dim must be at least 1");
  if (eval_every < 0) throw ValidationError("eval_every must be >= 0");
}

double DpConfig::effective_gamma() const {
  if (gamma_schedule == StepSchedule::kConstant) return gamma;
  return gamma / std::sqrt(static_cast<double>(std::max<std::int64_t>(
                     iterations, 1)));
}

TeacherGradientSource::TeacherGradientSource(const MlpModel& teacher,
                                             const DpConfig& cfg,
                                             std::uint64_t noise_seed)
    : teacher_(teacher), cfg_(cfg), noise_(noise_seed) {
  teacher_.validate();
  cfg_.validate();
}

SanitizedQuery TeacherGradientSource::query(const Tensor& synthetic,
                                            const Tensor& student_logits) {
  const Tensor t = forward(teacher_, synthetic).logits();
  DistillLoss dl = distillation_loss(t, student_logits, cfg_.distill);
  SanitizedQuery q;
  q.distill_loss = dl.loss;
  q.grad_norm = mean_row_norm(dl.per_example_grads);
  const double b = static_cast<double>(synthetic.rows());
  if (cfg_.aggregation == Aggregation::kPerExample) {
    q.gradients = sanitize_rows(dl.per_example_grads, b, cfg_.mechanism, noise_);
  } else {
    const auto rows = split_rows(dl.per_example_grads);
    q.gradients = broadcast_rows(sanitize_batch(rows, cfg_.mechanism, noise_),
                                 synthetic.rows());
  }
  return q;
}

void EnsembleSpec::validate() const {
  if (teachers.empty()) throw ValidationError("ensemble has no teachers");
  for (const MlpModel& t : teachers) {
    t.validate();
    if (t.output_dim() != teachers.front().output_dim() ||
        t.input_dim() != teachers.front().input_dim()) {
      throw DimensionError("ensemble teachers disagree on dimensions");
    }
  }
}

EnsembleGradientSource::EnsembleGradientSource(const EnsembleSpec& ensemble,
                                               const DpConfig& cfg,
                                               std::uint64_t noise_seed)
    : ensemble_(ensemble), cfg_(cfg), noise_(noise_seed) {
  ensemble_.validate();
  cfg_.validate();
}

std::size_t EnsembleGradientSource::input_dim() const {
  return ensemble_.teachers.front().input_dim();
}

std::size_t EnsembleGradientSource::classes() const {
  return ensemble_.teachers.front().output_dim();
}

SanitizedQuery EnsembleGradientSource::query(const Tensor& synthetic,
                                             const Tensor& student_logits) {
  const std::size_t rows = synthetic.rows();
  const std::size_t n = classes();
  const double count = static_cast<double>(ensemble_.teachers.size());
  Tensor sum = Tensor::zeros(rows, n);
  SanitizedQuery q;
  for (const MlpModel& teacher : ensemble_.teachers) {
    const Tensor t = forward(teacher, synthetic).logits();
    DistillLoss dl = distillation_loss(t, student_logits, cfg_.distill);
    q.distill_loss += dl.loss / count;
    q.grad_norm += mean_row_norm(dl.per_example_grads) / count;
    for (std::size_t r = 0; r < rows; ++r) {
      const Tensor b =
          bound_example(dl.per_example_grads.row_tensor(r), cfg_.mechanism);
      auto s = sum.row(r);
      for (std::size_t c = 0; c < n; ++c) s[c] += b[c];
    }
  }
  const double std_dev =
      cfg_.mechanism.noise_scale * cfg_.mechanism.norm_bound;
  for (double& v : sum.values()) {
    if (std_dev > 0.0) v += std_dev * noise_.gaussian();
    v /= count;
  }
  q.gradients = std::move(sum);
  return q;
}

TrainReport run_distillation(PrivateGradientSource& source, MlpModel student,
                             MlpModel generator, const DpConfig& cfg, Rng& rng,
                             const LabeledDataset* eval) {
  cfg.validate();
  student.validate();
  generator.validate();
  const std::size_t classes = source.classes();
  if (generator.input_dim() != cfg.noise_dim) {
    throw DimensionError("generator takes " +
                         std::to_string(generator.input_dim()) +
                         " noise inputs, config says " +
                         std::to_string(cfg.noise_dim));
  }
  if (generator.output_dim() != source.input_dim() ||
      student.input_dim() != source.input_dim()) {
    throw DimensionError(
        "generator output, student input and teacher input must agree");
  }
  if (student.output_dim() != classes) {
    throw DimensionError("student and teacher class counts differ");
  }
  if (student.layers.size() < 2) {
    throw DimensionError("student needs a hidden layer for the feature term");
  }

  const std::vector<double> grid = default_lambda_grid();
  const std::int64_t planned = affordable_iterations(cfg, classes, grid);
  PrivacyLedger ledger(accounting_params(cfg, classes), grid);

  TrainReport report;
  report.algorithm = "dpdfd";
  init_report(report, cfg, classes, planned);
  const double gamma = cfg.effective_gamma();
  const auto b = static_cast<std::size_t>(cfg.batch);

  for (std::int64_t t = 1; t <= planned; ++t) {
    const Tensor z = gaussian_batch(b, cfg.noise_dim, rng);
    const ForwardTrace gen_trace = forward(generator, z);
    const Tensor& synthetic = gen_trace.logits();
    const ForwardTrace s_trace = forward(student, synthetic);

    const SanitizedQuery q = source.query(synthetic, s_trace.logits());
    const Tensor y_s = dp_target(s_trace.logits(), q.gradients, gamma);

    const LossAndGrad ls = student_loss(s_trace.logits(), y_s);
    sgd_step_in_place(student, backward(student, s_trace, ls.logit_grad),
                      cfg.gamma_student);

    const ForwardTrace s2 = forward(student, synthetic);
    const LossAndGrad ls2 = student_loss(s2.logits(), y_s);
    const GeneratorLoss lg =
        generator_loss(s2.logits(), s2.penultimate(), cfg.generator);
    Tensor logit_grad = ls2.logit_grad;
    for (std::size_t i = 0; i < logit_grad.size(); ++i) {
      logit_grad[i] += lg.logit_grad[i];
    }
    const Gradients through =
        backward(student, s2, logit_grad, &lg.feature_grad);
    sgd_step_in_place(generator, backward(generator, gen_trace, through.input),
                      cfg.gamma_generator);

    if (!std::isfinite(q.distill_loss) || !std::isfinite(ls.loss) ||
        !std::isfinite(lg.loss) || !student.layers.back().weight.all_finite()) {
      throw NumericalError("non-finite loss at iteration " +
                           std::to_string(t));
    }
    ledger.charge(cfg.batch);
    TrainRecord rec;
    rec.iteration = t;
    rec.distill_loss = q.distill_loss;
    rec.student_loss = ls.loss;
    rec.generator_loss = ls2.loss + lg.loss;
    rec.accuracy = eval && eval_due(t, planned, cfg.eval_every)
                       ? accuracy(student, *eval)
                       : kNaN;
    rec.grad_norm = q.grad_norm;
    finish_record(rec, report, ledger, cfg.delta);
  }

  report.iterations_run = planned;
  report.queries = ledger.queries_composed();
  report.epsilon = ledger.epsilon(cfg.delta);
  check_budget(report);
  report.final_accuracy = eval ? accuracy(student, *eval) : kNaN;
  const Tensor probe = forward(generator, gaussian_batch(b, cfg.noise_dim, rng))
                           .logits();
  report.synthetic_entropy =
      batch_mean_entropy(forward(student, probe).logits());
  report.student = std::move(student);
  report.generator = std::move(generator);
  return report;
}

TrainReport dpdfd_train(const MlpModel& teacher, MlpModel student,
                        MlpModel generator, const DpConfig& cfg, Rng& rng,
                        const LabeledDataset* eval) {
  TeacherGradientSource source(teacher, cfg, mix_seed(rng.seed(), 1));
  return run_distillation(source, std::move(student), std::move(generator),
                          cfg, rng, eval);
}

TrainReport multi_model_train(const EnsembleSpec& ensemble, MlpModel student,
                              MlpModel generator, const DpConfig& cfg,
                              Rng& rng, const LabeledDataset* eval) {
  EnsembleGradientSource source(ensemble, cfg, mix_seed(rng.seed(), 1));
  TrainReport report = run_distillation(source, std::move(student),
                                        std::move(generator), cfg, rng, eval);
  report.algorithm = "dpdfd_multi";
  return report;
}

TrainReport direct_dp_train(const LabeledDataset& data, MlpModel model,
                            const DpConfig& cfg, Rng& rng,
                            const LabeledDataset* eval) {
  cfg.validate();
  data.validate();
  model.validate();
  if (model.input_dim() != data.dim() || model.output_dim() != data.classes) {
    throw DimensionError("model does not match the dataset");
  }
  const std::size_t classes = data.classes;
  const std::vector<double> grid = default_lambda_grid();
  const std::int64_t planned = affordable_iterations(cfg, classes, grid);
  PrivacyLedger ledger(accounting_params(cfg, classes), grid);
  NoiseSource noise(mix_seed(rng.seed(), 1));

  TrainReport report;
  report.algorithm = "dpsgd";
  init_report(report, cfg, classes, planned);
  const double gamma = cfg.effective_gamma();
  const double rate = std::min(
      1.0, static_cast<double>(cfg.batch) / static_cast<double>(data.size()));
  const std::size_t d = data.dim();

  for (std::int64_t t = 1; t <= planned; ++t) {
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (rate >= 1.0 || rng.uniform() < rate) picked.push_back(i);
    }
    TrainRecord rec;
    rec.iteration = t;
    rec.distill_loss = kNaN;
    rec.student_loss = kNaN;
    rec.grad_norm = kNaN;
    if (!picked.empty()) {
      Tensor x = Tensor::zeros(picked.size(), d);
      std::vector<std::size_t> y(picked.size());
      for (std::size_t r = 0; r < picked.size(); ++r) {
        auto src = data.inputs.row(picked[r]);
        std::copy(src.begin(), src.end(), x.row(r).begin());
        y[r] = data.labels[picked[r]];
      }
      const ForwardTrace trace = forward(model, x);
      const Tensor& out = trace.logits();
      const LossAndGrad ce = softmax_cross_entropy(out, one_hot(y, classes));
      // Per-example gradients of each example's own loss.
      Tensor per_example = ce.logit_grad;
      for (double& v : per_example.values()) {
        v *= static_cast<double>(picked.size());
      }
      Tensor sanitized;
      if (cfg.aggregation == Aggregation::kPerExample) {
        sanitized = sanitize_rows(per_example, static_cast<double>(cfg.batch),
                                  cfg.mechanism, noise);
      } else {
        Tensor v = sanitize_batch(split_rows(per_example), cfg.mechanism, noise);
        sanitized = broadcast_rows(v, picked.size());
      }
      const Tensor target = dp_target(out, sanitized, gamma);
      const LossAndGrad ls = student_loss(out, target);
      sgd_step_in_place(model, backward(model, trace, ls.logit_grad),
                        cfg.gamma_student);
      if (!std::isfinite(ce.loss) || !std::isfinite(ls.loss)) {
        throw NumericalError("non-finite loss at iteration " +
                             std::to_string(t));
      }
      rec.distill_loss = ce.loss;
      rec.student_loss = ls.loss;
      rec.grad_norm = mean_row_norm(per_example);
    }
    ledger.charge(cfg.batch);
    rec.generator_loss = 0.0;
    rec.accuracy = eval && eval_due(t, planned, cfg.eval_every)
                       ? accuracy(model, *eval)
                       : kNaN;
    if (std::isnan(rec.grad_norm)) {
      rec.grad_norm = report.records.empty()
                          ? std::numeric_limits<double>::infinity()
                          : report.records.back().grad_norm_runmin;
    }
    finish_record(rec, report, ledger, cfg.delta);
  }

  report.iterations_run = planned;
  report.queries = ledger.queries_composed();
  report.epsilon = ledger.epsilon(cfg.delta);
  check_budget(report);
  report.final_accuracy = eval ? accuracy(model, *eval) : kNaN;
  report.synthetic_entropy = kNaN;
  report.student = std::move(model);
  return report;
}

namespace {

using nlohmann::json;

// JSON has no NaN/Inf; they are written as strings.
json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string report_to_json(const TrainReport& report) {
  json doc;
  doc["algorithm"] = report.algorithm;
  doc["iterations_requested"] = report.iterations_requested;
  doc["iterations_run"] = report.iterations_run;
  doc["stopped_by_budget"] = report.stopped_by_budget;
  doc["queries"] = report.queries;
  doc["epsilon"] = number(report.epsilon.epsilon);
  doc["lambda_star"] = number(report.epsilon.lambda_star);
  doc["epsilon_clamped"] = report.epsilon.clamped;
  doc["delta"] = report.delta;
  doc["epsilon_budget"] =
      report.epsilon_budget ? json(*report.epsilon_budget) : json(nullptr);
  doc["accounting"] = accounting_mode_name(report.accounting);
  doc["gamma"] = report.gamma;
  doc["norm_bound"] = report.norm_bound;
  doc["noise_scale"] = report.noise_scale;
  doc["classes"] = report.classes;
  doc["final_accuracy"] = number(report.final_accuracy);
  doc["synthetic_entropy"] = number(report.synthetic_entropy);
  json records = json::array();
  for (const TrainRecord& r : report.records) {
    records.push_back({{"iter", r.iteration},
                       {"L_T", number(r.distill_loss)},
                       {"L_S", number(r.student_loss)},
                       {"L_G", number(r.generator_loss)},
                       {"acc", number(r.accuracy)},
                       {"eps_spent", number(r.epsilon)},
                       {"gradnorm", number(r.grad_norm)},
                       {"gradnorm_runmin", number(r.grad_norm_runmin)}});
  }
  doc["records"] = std::move(records);
  return doc.dump(2);
}

std::string report_to_csv(const TrainReport& report) {
  std::ostringstream os;
  os << "iter,L_T,L_S,L_G,acc,eps_spent,gradnorm_runmin\n";
  for (const TrainRecord& r : report.records) {
    os << r.iteration << ',' << csv_number(r.distill_loss) << ','
       << csv_number(r.student_loss) << ',' << csv_number(r.generator_loss)
       << ',' << csv_number(r.accuracy) << ',' << csv_number(r.epsilon) << ','
       << csv_number(r.grad_norm_runmin) << '\n';
  }
  return os.str();
}

ConvergenceSummary convergence_monitor(const TrainReport& report,
                                       const ConvergenceOptions& options) {
  ConvergenceSummary out;
  out.final_to_tenth_ratio = kNaN;
  out.final_running_min = kNaN;
  const std::size_t n = report.records.size();
  if (n == 0) return out;
  double m = std::numeric_limits<double>::infinity();
  for (const TrainRecord& r : report.records) {
    m = std::min(m, r.grad_norm);
    out.running_min.push_back(m);
  }
  out.final_running_min = out.running_min.back();
  const std::size_t half = n / 2;
  out.stalled = half >= 1 && !(out.running_min.back() < out.running_min[half - 1]);
  if (n >= 10) {
    out.final_to_tenth_ratio = out.running_min.back() / out.running_min[n / 10 - 1];
  }
  const double gc = report.gamma * report.norm_bound;
  if (gc > 0.0) {
    const double l0 = std::max(
        0.0, report.records.front().distill_loss - options.loss_floor);
    const double noise = 1.0 + report.noise_scale * report.noise_scale *
                                   static_cast<double>(report.classes);
    for (std::size_t t = 1; t <= n; ++t) {
      const double td = static_cast<double>(t);
      out.envelope.push_back(std::sqrt(2.0 * l0 / (td * gc) +
                                       2.0 * options.smoothness * gc * noise));
    }
  }
  return out;
}

}  // namespace dpdfd
