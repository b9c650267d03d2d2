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

#include "dpdfd/cli.h"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "dpdfd/accountant.h"
#include "dpdfd/checkpoint.h"
#include "dpdfd/datasets.h"
#include "dpdfd/train.h"

namespace dpdfd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInfeasible:
      return kExitInfeasible;
    case ErrorKind::kNumerical:
      return kExitNumerical;
    default:
      return kExitValidation;
  }
}

json default_config() {
  return json{
      {"seed", nullptr},
      {"out", "out"},
      {"dataset", "blobs"},
      {"dataset_classes", 3},
      {"dataset_per_class", 500},
      {"dataset_dim", 8},
      {"dataset_spread", 0.5},
      {"dataset_seed", 0},
      {"dataset_path", nullptr},
      {"dataset_test_path", nullptr},
      {"pixel_min", 0.0},
      {"pixel_max", 255.0},
      {"pretrain_steps", 2000},
      {"pretrain_lr", 0.1},
      {"pretrain_batch", 64},
      {"partitions", 1},
      {"teachers", json::array()},
      {"clip_bound", 1e-3},
      {"sigma", 100.0},
      {"stability", 1e-4},
      {"mode", "normalize"},
      {"aggregation", "per_example"},
      {"dp_step", 64.0},
      {"gamma", nullptr},
      {"gamma_schedule", "constant"},
      {"lr_student", 1.0},
      {"lr_generator", 0.01},
      {"batch", 256},
      {"iters", 2000},
      {"delta", 1e-5},
      {"epsilon", nullptr},
      {"accounting", "scaled"},
      {"alpha", 1.0},
      {"beta", 1.0},
      {"feature_term", "penalize"},
      {"loss_terms", "CE+IE+Norm"},
      {"tau", 1.0},
      {"temperature", 4.0},
      {"noise_dim", 16},
      {"eval_every", 1},
      {"classes", nullptr},
      {"lambda", nullptr},
      {"sweep_axis", "C"},
      {"sweep_values", json::array({1e-3, 1.0})},
      {"sweep_seeds", 5},
      {"sweep_modes", json::array({"normalize", "clip"})},
  };
}

json merge_config(json base, const json& overrides) {
  if (!overrides.is_object()) {
    throw ValidationError("config must be a JSON object");
  }
  for (const auto& [key, value] : overrides.items()) {
    if (!base.contains(key)) {
      throw ValidationError("unknown config key '" + key + "'");
    }
    base[key] = value;
  }
  return base;
}

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<double> sigma;
  std::optional<double> clip_bound;
  std::optional<double> stability;
  std::optional<std::int64_t> batch;
  std::optional<std::int64_t> iters;
  std::optional<std::string> mode;
  std::optional<std::string> accounting;
  std::vector<std::string> teachers;
  std::optional<std::string> out;
  std::optional<std::int64_t> classes;
  std::optional<double> lambda;
  std::optional<std::string> axis;
  std::vector<std::string> values;
  std::vector<std::string> sets;
  std::string query = "epsilon";
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(what + " is not valid JSON: " + e.what());
  }
}

json build_config(const Flags& f) {
  json cfg = default_config();
  if (f.config) cfg = merge_config(cfg, parse_json(read_file(*f.config), *f.config));
  json o = json::object();
  if (f.seed) o["seed"] = *f.seed;
  if (f.epsilon) o["epsilon"] = *f.epsilon;
  if (f.delta) o["delta"] = *f.delta;
  if (f.sigma) o["sigma"] = *f.sigma;
  if (f.clip_bound) o["clip_bound"] = *f.clip_bound;
  if (f.stability) o["stability"] = *f.stability;
  if (f.batch) o["batch"] = *f.batch;
  if (f.iters) o["iters"] = *f.iters;
  if (f.mode) o["mode"] = *f.mode;
  if (f.accounting) o["accounting"] = *f.accounting;
  if (!f.teachers.empty()) o["teachers"] = f.teachers;
  if (f.out) o["out"] = *f.out;
  if (f.classes) o["classes"] = *f.classes;
  if (f.lambda) o["lambda"] = *f.lambda;
  if (f.axis) o["sweep_axis"] = *f.axis;
  if (!f.values.empty()) {
    json vals = json::array();
    for (const std::string& v : f.values) {
      json parsed = json::parse(v, nullptr, false);
      vals.push_back(parsed.is_discarded() ? json(v) : parsed);
    }
    o["sweep_values"] = vals;
  }
  for (const std::string& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("--set expects key=value, got '" + s + "'");
    }
    const std::string value = s.substr(eq + 1);
    json parsed = json::parse(value, nullptr, false);
    o[s.substr(0, eq)] = parsed.is_discarded() ? json(value) : parsed;
  }
  return merge_config(cfg, o);
}

const json& field(const json& cfg, const char* key) {
  if (!cfg.contains(key)) throw ValidationError(std::string("missing key ") + key);
  return cfg.at(key);
}

double get_double(const json& cfg, const char* key) {
  const json& v = field(cfg, key);
  if (!v.is_number()) {
    throw ValidationError(std::string(key) + " must be a number");
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(std::string(key) + " must be finite");
  return d;
}

std::optional<double> get_optional_double(const json& cfg, const char* key) {
  if (field(cfg, key).is_null()) return std::nullopt;
  return get_double(cfg, key);
}

std::int64_t get_int(const json& cfg, const char* key) {
  const json& v = field(cfg, key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) {
      return static_cast<std::int64_t>(d);
    }
  }
  throw ValidationError(std::string(key) + " must be an integer");
}

std::size_t get_count(const json& cfg, const char* key) {
  const std::int64_t v = get_int(cfg, key);
  if (v < 0) throw ValidationError(std::string(key) + " must be nonnegative");
  return static_cast<std::size_t>(v);
}

std::string get_string(const json& cfg, const char* key) {
  const json& v = field(cfg, key);
  if (!v.is_string()) {
    throw ValidationError(std::string(key) + " must be a string");
  }
  return v.get<std::string>();
}

std::vector<std::string> get_strings(const json& cfg, const char* key) {
  const json& v = field(cfg, key);
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw ValidationError(std::string(key) + " must be a list");
  std::vector<std::string> out;
  for (const json& e : v) {
    if (!e.is_string()) {
      throw ValidationError(std::string(key) + " entries must be strings");
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

// --seed / config value, then DPDFD_SEED.
std::uint64_t resolve_seed(json& cfg) {
  const json& v = field(cfg, "seed");
  if (v.is_number_unsigned() || v.is_number_integer()) {
    if (v.is_number_integer() && !v.is_number_unsigned() &&
        v.get<std::int64_t>() < 0) {
      throw ValidationError("seed must be nonnegative");
    }
    return v.get<std::uint64_t>();
  }
  if (!v.is_null()) throw ValidationError("seed must be an integer");
  const char* env = std::getenv("DPDFD_SEED");
  if (env == nullptr || *env == '\0') {
    throw ValidationError("no seed: pass --seed, set it in the config, or set "
                          "DPDFD_SEED");
  }
  std::uint64_t seed = 0;
  const char* end = env + std::char_traits<char>::length(env);
  auto [ptr, ec] = std::from_chars(env, end, seed);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("DPDFD_SEED must be a nonnegative integer");
  }
  cfg["seed"] = seed;
  return seed;
}

DpConfig make_dp_config(const json& cfg) {
  DpConfig dp;
  dp.mechanism.norm_bound = get_double(cfg, "clip_bound");
  dp.mechanism.noise_scale = get_double(cfg, "sigma");
  dp.mechanism.stability = get_double(cfg, "stability");
  dp.mechanism.mode = parse_bound_mode(get_string(cfg, "mode"));
  dp.aggregation = parse_aggregation(get_string(cfg, "aggregation"));
  dp.mechanism.validate();
  const auto gamma = get_optional_double(cfg, "gamma");
  dp.gamma = gamma ? *gamma
                   : get_double(cfg, "dp_step") / dp.mechanism.norm_bound;
  dp.gamma_schedule = parse_schedule(get_string(cfg, "gamma_schedule"));
  dp.gamma_student = get_double(cfg, "lr_student");
  dp.gamma_generator = get_double(cfg, "lr_generator");
  dp.batch = get_int(cfg, "batch");
  dp.iterations = get_int(cfg, "iters");
  dp.delta = get_double(cfg, "delta");
  dp.epsilon_budget = get_optional_double(cfg, "epsilon");
  dp.accounting = parse_accounting_mode(get_string(cfg, "accounting"));
  dp.generator.alpha = get_double(cfg, "alpha");
  dp.generator.beta = get_double(cfg, "beta");
  dp.generator.feature_sign = parse_feature_sign(get_string(cfg, "feature_term"));
  dp.generator.set_terms(get_string(cfg, "loss_terms"));
  dp.distill.tau = get_double(cfg, "tau");
  dp.distill.temperature = get_double(cfg, "temperature");
  dp.noise_dim = get_count(cfg, "noise_dim");
  dp.eval_every = get_int(cfg, "eval_every");
  dp.validate();
  return dp;
}

json dataset_manifest(const json& cfg, const DatasetSplit& data) {
  json m{{"k", data.train.classes},
         {"d", data.train.dim()},
         {"N", data.train.size() + data.test.size()},
         {"N_train", data.train.size()},
         {"N_test", data.test.size()},
         {"source", get_string(cfg, "dataset")}};
  if (get_string(cfg, "dataset") == "blobs") {
    m["seed"] = get_int(cfg, "dataset_seed");
    m["spread"] = get_double(cfg, "dataset_spread");
  } else {
    m["path"] = get_string(cfg, "dataset_path");
  }
  return m;
}

DatasetSplit load_dataset(const json& cfg) {
  const std::string kind = get_string(cfg, "dataset");
  if (kind == "blobs") {
    BlobSpec spec;
    spec.classes = get_count(cfg, "dataset_classes");
    spec.per_class = get_count(cfg, "dataset_per_class");
    spec.dim = get_count(cfg, "dataset_dim");
    spec.spread = get_double(cfg, "dataset_spread");
    spec.seed = static_cast<std::uint64_t>(get_int(cfg, "dataset_seed"));
    return make_blobs(spec);
  }
  if (kind != "csv") {
    throw ValidationError("dataset must be blobs or csv, got '" + kind + "'");
  }
  GridCsvOptions options;
  options.pixel_min = get_double(cfg, "pixel_min");
  options.pixel_max = get_double(cfg, "pixel_max");
  if (field(cfg, "dataset_path").is_null()) {
    throw ValidationError("dataset csv needs dataset_path");
  }
  LabeledDataset all = load_grid_csv(get_string(cfg, "dataset_path"), options);
  DatasetSplit out;
  if (!field(cfg, "dataset_test_path").is_null()) {
    options.classes = all.classes;
    out.train = std::move(all);
    out.test = load_grid_csv(get_string(cfg, "dataset_test_path"), options);
  } else {
    // Every fifth row is held out.
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < all.size(); ++i) (i % 5 == 4 ? te : tr).push_back(i);
    if (tr.empty() || te.empty()) {
      throw DegenerateInputError("csv dataset too small to hold out a test set");
    }
    auto take = [&](const std::vector<std::size_t>& idx, Split split) {
      LabeledDataset d;
      d.classes = all.classes;
      d.split = split;
      std::vector<double> flat;
      for (std::size_t i : idx) {
        auto r = all.inputs.row(i);
        flat.insert(flat.end(), r.begin(), r.end());
        d.labels.push_back(all.labels[i]);
      }
      d.inputs = Tensor::matrix(idx.size(), all.dim(), std::move(flat));
      return d;
    };
    out.train = take(tr, Split::kTrain);
    out.test = take(te, Split::kTest);
  }
  out.test.split = Split::kTest;
  return out;
}

fs::path prepare_out(const json& cfg) {
  const fs::path out = get_string(cfg, "out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  write_file(out / "config.json", cfg.dump(2) + "\n");
  return out;
}

json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

int cmd_pretrain(json cfg, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(cfg);
  const DatasetSplit data = load_dataset(cfg);
  const std::size_t parts = get_count(cfg, "partitions");
  PretrainOptions options;
  options.steps = get_count(cfg, "pretrain_steps");
  options.lr = get_double(cfg, "pretrain_lr");
  options.batch = get_count(cfg, "pretrain_batch");
  const fs::path dir = prepare_out(cfg);

  const MlpSpec spec = teacher_spec(data.train.dim(), data.train.classes);
  const std::vector<LabeledDataset> shards =
      parts == 1 ? std::vector<LabeledDataset>{data.train}
                 : partition(data.train, parts);
  json metrics;
  metrics["dataset"] = dataset_manifest(cfg, data);
  metrics["majority_baseline"] = majority_baseline(data.test);
  json teachers = json::array();
  for (std::size_t j = 0; j < shards.size(); ++j) {
    options.seed = parts == 1 ? seed : (seed ^ j);
    const PretrainResult r =
        pretrain_teacher(shards[j], spec, options, &data.test);
    const std::string name =
        parts == 1 ? "teacher.json" : "teacher_" + std::to_string(j) + ".json";
    save_model(r.model, dir / name);
    teachers.push_back({{"path", (dir / name).string()},
                        {"train_size", shards[j].size()},
                        {"train_accuracy", r.train_accuracy},
                        {"test_accuracy", *r.test_accuracy},
                        {"final_loss", r.final_loss}});
  }
  metrics["teachers"] = teachers;
  if (parts == 1) {
    metrics["train_accuracy"] = teachers[0]["train_accuracy"];
    metrics["test_accuracy"] = teachers[0]["test_accuracy"];
    metrics["final_loss"] = teachers[0]["final_loss"];
  }
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  write_file(dir / "dataset.json", metrics["dataset"].dump(2) + "\n");
  out << metrics.dump() << '\n';
  return kExitOk;
}

void write_report(const fs::path& dir, const TrainReport& report) {
  write_file(dir / "report.json", report_to_json(report) + "\n");
  write_file(dir / "report.csv", report_to_csv(report));
  save_model(report.student, dir / "student.json");
  if (report.generator) save_model(*report.generator, dir / "generator.json");
}

json summary_line(const TrainReport& r) {
  return json{{"algorithm", r.algorithm},
              {"accuracy", number(r.final_accuracy)},
              {"epsilon", number(r.epsilon.epsilon)},
              {"delta", r.delta},
              {"iterations_run", r.iterations_run},
              {"stopped_by_budget", r.stopped_by_budget}};
}

// One distillation run from a merged config; shared by distill and sweep.
TrainReport distill_run(const json& cfg, std::uint64_t seed,
                        const std::vector<MlpModel>& teachers,
                        const LabeledDataset& eval) {
  const DpConfig dp = make_dp_config(cfg);
  const MlpModel& first = teachers.front();
  if (first.input_dim() != eval.dim() || first.output_dim() != eval.classes) {
    throw DimensionError("teacher does not match the evaluation dataset");
  }
  Rng rng(seed);
  MlpModel student =
      make_mlp(student_spec(first.input_dim(), first.output_dim()), rng);
  MlpModel generator =
      make_mlp(generator_spec(dp.noise_dim, first.input_dim()), rng);
  if (teachers.size() == 1) {
    return dpdfd_train(first, std::move(student), std::move(generator), dp,
                       rng, &eval);
  }
  EnsembleSpec ensemble{teachers};
  return multi_model_train(ensemble, std::move(student), std::move(generator),
                           dp, rng, &eval);
}

std::vector<MlpModel> load_teachers(const json& cfg) {
  const auto paths = get_strings(cfg, "teachers");
  if (paths.empty()) {
    throw ValidationError("no teacher checkpoints: pass --teachers <path>...");
  }
  std::vector<MlpModel> out;
  for (const std::string& p : paths) out.push_back(load_model(p));
  return out;
}

int cmd_distill(json cfg, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(cfg);
  make_dp_config(cfg);
  const auto teachers = load_teachers(cfg);
  const DatasetSplit data = load_dataset(cfg);
  const fs::path dir = prepare_out(cfg);
  const TrainReport report = distill_run(cfg, seed, teachers, data.test);
  write_report(dir, report);
  out << summary_line(report).dump() << '\n';
  return kExitOk;
}

int cmd_dpsgd(json cfg, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(cfg);
  const DpConfig dp = make_dp_config(cfg);
  const DatasetSplit data = load_dataset(cfg);
  const fs::path dir = prepare_out(cfg);
  Rng rng(seed);
  MlpModel model =
      make_mlp(student_spec(data.train.dim(), data.train.classes), rng);
  const TrainReport report =
      direct_dp_train(data.train, std::move(model), dp, rng, &data.test);
  write_report(dir, report);
  out << summary_line(report).dump() << '\n';
  return kExitOk;
}

AccountingParams account_params(const json& cfg) {
  AccountingParams p;
  p.norm_bound = get_double(cfg, "clip_bound");
  p.classes = field(cfg, "classes").is_null() ? 10 : get_int(cfg, "classes");
  p.batch = get_int(cfg, "batch");
  p.iterations = get_int(cfg, "iters");
  p.noise_scale = get_double(cfg, "sigma");
  p.delta = get_double(cfg, "delta");
  p.mode = parse_accounting_mode(get_string(cfg, "accounting"));
  return p;
}

int cmd_account(json cfg, const std::string& query, std::ostream& out) {
  AccountingParams p = account_params(cfg);
  std::vector<double> grid = default_lambda_grid();
  if (const auto lambda = get_optional_double(cfg, "lambda")) grid = {*lambda};
  auto params_json = [&](const AccountingParams& q) {
    return json{{"C", q.norm_bound}, {"n", q.classes},   {"B", q.batch},
                {"T", q.iterations}, {"sigma", q.noise_scale},
                {"delta", q.delta}};
  };
  json result;
  result["query"] = query;
  result["mode"] = accounting_mode_name(p.mode);
  auto need_target = [&]() {
    const auto eps = get_optional_double(cfg, "epsilon");
    if (!eps) throw ValidationError(query + " needs --epsilon");
    return *eps;
  };
  if (query == "epsilon") {
    const EpsilonResult r = optimal_epsilon(p, grid);
    result["epsilon"] = number(r.epsilon);
    result["lambda_star"] = r.lambda_star;
    result["clamped"] = r.clamped;
  } else if (query == "sigma") {
    const double target = need_target();
    p.noise_scale = calibrate_sigma(target, p, grid);
    const EpsilonResult r = optimal_epsilon(p, grid);
    result["sigma"] = p.noise_scale;
    result["target_epsilon"] = target;
    result["epsilon"] = number(r.epsilon);
    result["lambda_star"] = r.lambda_star;
  } else if (query == "max-iters") {
    const double target = need_target();
    const std::int64_t t = max_iterations(target, p, grid);
    p.iterations = t;
    result["max_iters"] = t;
    result["target_epsilon"] = target;
    result["epsilon"] = number(optimal_epsilon(p, grid).epsilon);
  } else {
    throw ValidationError("account query must be epsilon, sigma or max-iters");
  }
  result["params"] = params_json(p);
  out << result.dump() << '\n';
  return kExitOk;
}

std::string csv_cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  return v.dump();
}

std::string csv_escape(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

int cmd_sweep(json cfg, std::ostream& out) {
  const std::uint64_t base = resolve_seed(cfg);
  const std::string axis = get_string(cfg, "sweep_axis");
  if (axis != "C" && axis != "sigma" && axis != "loss-terms") {
    throw ValidationError("sweep axis must be C, sigma or loss-terms");
  }
  const json values = field(cfg, "sweep_values");
  if (!values.is_array() || values.empty()) {
    throw ValidationError("sweep_values must be a nonempty list");
  }
  for (const json& v : values) {
    if (axis == "loss-terms" ? !v.is_string() : !v.is_number()) {
      throw ValidationError("sweep value " + v.dump() + " has the wrong type");
    }
  }
  const std::size_t seeds = get_count(cfg, "sweep_seeds");
  if (seeds < 1) throw ValidationError("sweep_seeds must be at least 1");
  std::vector<std::string> modes{get_string(cfg, "mode")};
  if (axis == "C") modes = get_strings(cfg, "sweep_modes");
  for (const std::string& m : modes) parse_bound_mode(m);
  const auto teachers = load_teachers(cfg);
  const DatasetSplit data = load_dataset(cfg);
  const fs::path dir = prepare_out(cfg);

  std::ostringstream rows;
  rows << "axis,value,mode,seed,status,accuracy,epsilon,iterations_run,"
          "synthetic_entropy,message\n";
  struct Agg {
    std::vector<double> acc, entropy;
    std::size_t failed = 0;
  };
  std::map<std::pair<std::size_t, std::string>, Agg> aggs;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    for (const std::string& mode : modes) {
      for (std::size_t s = 0; s < seeds; ++s) {
        const std::uint64_t seed = base ^ s;
        json run = cfg;
        run["mode"] = mode;
        if (axis == "C") run["clip_bound"] = values[vi];
        if (axis == "sigma") run["sigma"] = values[vi];
        if (axis == "loss-terms") run["loss_terms"] = values[vi];
        Agg& agg = aggs[{vi, mode}];
        rows << axis << ',' << csv_escape(csv_cell(values[vi])) << ',' << mode
             << ',' << seed << ',';
        try {
          const TrainReport r = distill_run(run, seed, teachers, data.test);
          agg.acc.push_back(r.final_accuracy);
          agg.entropy.push_back(r.synthetic_entropy);
          rows << "ok," << csv_cell(number(r.final_accuracy)) << ','
               << csv_cell(number(r.epsilon.epsilon)) << ',' << r.iterations_run
               << ',' << csv_cell(number(r.synthetic_entropy)) << ",\n";
        } catch (const Error& e) {
          ++agg.failed;
          rows << error_kind_name(e.kind()) << ",,,,," << csv_escape(e.what())
               << '\n';
        }
      }
    }
  }
  write_file(dir / "sweep.csv", rows.str());

  std::ostringstream summary;
  summary << "axis,value,mode,runs,failed,acc_mean,acc_std,entropy_mean\n";
  json table = json::array();
  for (const auto& [key, agg] : aggs) {
    const double n = static_cast<double>(agg.acc.size());
    double mean = 0.0, ent = 0.0, var = 0.0;
    for (double a : agg.acc) mean += a / n;
    for (double e : agg.entropy) ent += e / n;
    for (double a : agg.acc) var += (a - mean) * (a - mean);
    const double sd = agg.acc.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    if (agg.acc.empty()) mean = ent = std::nan("");
    const json& value = values[key.first];
    summary << axis << ',' << csv_escape(csv_cell(value)) << ',' << key.second
            << ',' << agg.acc.size() << ',' << agg.failed << ','
            << csv_cell(number(mean)) << ',' << csv_cell(number(sd)) << ','
            << csv_cell(number(ent)) << '\n';
    table.push_back({{"value", value},
                     {"mode", key.second},
                     {"runs", agg.acc.size()},
                     {"failed", agg.failed},
                     {"acc_mean", number(mean)},
                     {"acc_std", number(sd)},
                     {"entropy_mean", number(ent)}});
  }
  write_file(dir / "summary.csv", summary.str());
  out << json{{"axis", axis}, {"summary", table}}.dump() << '\n';
  return kExitOk;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file");
  sub->add_option("--seed", f.seed, "Seed (falls back to DPDFD_SEED)");
  sub->add_option("--epsilon", f.epsilon, "Privacy budget");
  sub->add_option("--delta", f.delta, "Privacy delta");
  sub->add_option("--sigma", f.sigma, "Noise scale");
  sub->add_option("--clip-bound", f.clip_bound, "Norm bound C");
  sub->add_option("--stability", f.stability, "Stability constant e");
  sub->add_option("--batch", f.batch, "Batch size B");
  sub->add_option("--iters", f.iters, "Iterations T");
  sub->add_option("--mode", f.mode, "normalize | clip");
  sub->add_option("--accounting", f.accounting, "scaled | consistent");
  sub->add_option("--teachers", f.teachers, "Teacher checkpoints")
      ->expected(1, -1);
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--set", f.sets, "Override any config key: key=value")
      ->expected(1, -1);
}

void print_error(std::ostream& err, std::string_view kind,
                 const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Differentially private data-free distillation"};
  app.require_subcommand(1);
  Flags f;
  CLI::App* pretrain = app.add_subcommand("pretrain", "Train teacher(s)");
  CLI::App* distill = app.add_subcommand("distill", "Private distillation");
  CLI::App* dpsgd = app.add_subcommand("dpsgd", "Direct private training");
  CLI::App* account = app.add_subcommand("account", "Privacy accounting");
  CLI::App* sweep = app.add_subcommand("sweep", "Ablation sweep");
  for (CLI::App* sub : {pretrain, distill, dpsgd, account, sweep}) {
    add_common(sub, f);
  }
  account->add_option("query", f.query, "epsilon | sigma | max-iters");
  account->add_option("--classes", f.classes, "Gradient length n");
  account->add_option("--lambda", f.lambda, "Single RDP order");
  sweep->add_option("--axis", f.axis, "C | sigma | loss-terms");
  sweep->add_option("--values", f.values, "Axis values")->expected(1, -1);

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "validation", e.what());
    return kExitValidation;
  }

  try {
    json cfg = build_config(f);
    if (*pretrain) return cmd_pretrain(std::move(cfg), out);
    if (*distill) return cmd_distill(std::move(cfg), out);
    if (*dpsgd) return cmd_dpsgd(std::move(cfg), out);
    if (*account) return cmd_account(std::move(cfg), f.query, out);
    return cmd_sweep(std::move(cfg), out);
  } catch (const Error& e) {
    print_error(err, error_kind_name(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    print_error(err, "validation", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return kExitInternal;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace dpdfd::cli
