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

#include "dpdfd/datasets.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dpdfd/errors.h"
#include "dpdfd/rng.h"

namespace dpdfd {

void LabeledDataset::validate() const {
  if (labels.empty()) throw DegenerateInputError("dataset is empty");
  if (classes < 1) throw ValidationError("dataset needs at least one class");
  if (inputs.rank() != 2 || inputs.rows() != labels.size()) {
    throw DimensionError("dataset has " + std::to_string(labels.size()) +
                         " labels but inputs " + inputs.shape_string());
  }
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw ValidationError("label " + std::to_string(y) +
                            " out of range for " + std::to_string(classes) +
                            " classes");
    }
  }
  require_finite(inputs, "dataset inputs");
  for (double v : inputs.values()) {
    if (v < -1.0 || v > 1.0) {
      throw ValidationError("dataset inputs must lie in [-1, 1]");
    }
  }
}

LabeledDataset LabeledDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > size()) {
    throw ValidationError("invalid slice [" + std::to_string(begin) + ", " +
                          std::to_string(end) + ") of " +
                          std::to_string(size()) + " rows");
  }
  const std::size_t d = dim();
  LabeledDataset out;
  out.classes = classes;
  out.split = split;
  out.labels.assign(labels.begin() + begin, labels.begin() + end);
  auto v = inputs.values().subspan(begin * d, (end - begin) * d);
  out.inputs = Tensor::matrix(end - begin, d, {v.begin(), v.end()});
  return out;
}

namespace {

LabeledDataset gather(const std::vector<std::vector<double>>& rows,
                      const std::vector<std::size_t>& labels,
                      std::vector<std::size_t> order, std::size_t classes,
                      Split split, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  LabeledDataset out;
  out.classes = classes;
  out.split = split;
  std::vector<double> flat;
  for (std::size_t idx : order) {
    flat.insert(flat.end(), rows[idx].begin(), rows[idx].end());
    out.labels.push_back(labels[idx]);
  }
  out.inputs = Tensor::matrix(order.size(), rows.front().size(), std::move(flat));
  return out;
}

}  // namespace

DatasetSplit make_blobs(const BlobSpec& spec) {
  if (spec.classes < 2) throw ValidationError("blobs need k >= 2");
  if (spec.dim < 2) throw ValidationError("blobs need d >= 2");
  if (spec.per_class < 5) {
    throw ValidationError("blobs need at least 5 points per class");
  }
  if (!(spec.spread >= 0.0) || !std::isfinite(spec.spread)) {
    throw ValidationError("blob spread must be nonnegative and finite");
  }
  Rng rng(spec.seed);
  std::vector<std::vector<double>> centers(spec.classes,
                                           std::vector<double>(spec.dim));
  for (auto& c : centers) {
    for (double& v : c) v = rng.uniform(-1.0, 1.0);
  }
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  double max_abs = 0.0;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      std::vector<double> x = centers[k];
      for (double& v : x) {
        v += spec.spread * rng.gaussian();
        max_abs = std::max(max_abs, std::abs(v));
      }
      rows.push_back(std::move(x));
      labels.push_back(k);
    }
  }
  if (max_abs > 0.0) {
    for (auto& x : rows) {
      for (double& v : x) v /= max_abs;
    }
  }
  const std::size_t n_test = spec.per_class / 5;
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      const std::size_t idx = k * spec.per_class + i;
      (i < spec.per_class - n_test ? train_idx : test_idx).push_back(idx);
    }
  }
  DatasetSplit out;
  out.train = gather(rows, labels, train_idx, spec.classes, Split::kTrain, rng);
  out.test = gather(rows, labels, test_idx, spec.classes, Split::kTest, rng);
  return out;
}

namespace {

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ValidationError("line " + std::to_string(line) + ": bad number '" +
                          std::string(tok) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

void check_pixel_range(const GridCsvOptions& o) {
  if (!(o.pixel_max > o.pixel_min)) {
    throw ValidationError("pixel_max must exceed pixel_min");
  }
}

}  // namespace

LabeledDataset load_grid_csv(const std::filesystem::path& path,
                             const GridCsvOptions& options) {
  check_pixel_range(options);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const double span = options.pixel_max - options.pixel_min;
  std::vector<double> flat;
  std::vector<std::size_t> labels;
  std::size_t d = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    std::vector<std::string_view> toks;
    while (true) {
      const std::size_t comma = rest.find(',');
      toks.push_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (toks.size() < 2) {
      throw ValidationError("line " + std::to_string(lineno) +
                            ": need a label and at least one pixel");
    }
    if (d == 0) d = toks.size() - 1;
    if (toks.size() - 1 != d) {
      throw ValidationError("line " + std::to_string(lineno) + ": expected " +
                            std::to_string(d) + " pixels, got " +
                            std::to_string(toks.size() - 1));
    }
    const double label = parse_double(toks[0], lineno);
    if (label < 0.0 || label != std::floor(label) ||
        (options.classes && label >= static_cast<double>(*options.classes))) {
      throw ValidationError("line " + std::to_string(lineno) + ": label " +
                            std::string(toks[0]) + " out of range");
    }
    labels.push_back(static_cast<std::size_t>(label));
    for (std::size_t j = 1; j < toks.size(); ++j) {
      const double v = parse_double(toks[j], lineno);
      if (v < options.pixel_min || v > options.pixel_max) {
        throw ValidationError("line " + std::to_string(lineno) + ": pixel " +
                              std::string(toks[j]) + " outside [" +
                              std::to_string(options.pixel_min) + ", " +
                              std::to_string(options.pixel_max) + "]");
      }
      flat.push_back(std::clamp(2.0 * (v - options.pixel_min) / span - 1.0,
                                -1.0, 1.0));
    }
  }
  if (labels.empty()) {
    throw DegenerateInputError(path.string() + " contains no examples");
  }
  LabeledDataset out;
  out.classes = options.classes
                    ? *options.classes
                    : *std::max_element(labels.begin(), labels.end()) + 1;
  out.inputs = Tensor::matrix(labels.size(), d, std::move(flat));
  out.labels = std::move(labels);
  out.validate();
  return out;
}

void save_grid_csv(const LabeledDataset& data,
                   const std::filesystem::path& path,
                   const GridCsvOptions& options) {
  check_pixel_range(options);
  data.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  const double span = options.pixel_max - options.pixel_min;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double x : data.inputs.row(i)) {
      out << ',' << options.pixel_min + (x + 1.0) * 0.5 * span;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<LabeledDataset> partition(const LabeledDataset& data,
                                      std::size_t parts) {
  data.validate();
  if (parts < 1 || parts > data.size()) {
    throw ValidationError("cannot split " + std::to_string(data.size()) +
                          " rows into " + std::to_string(parts) + " parts");
  }
  std::vector<LabeledDataset> out;
  const std::size_t base = data.size() / parts;
  const std::size_t extra = data.size() % parts;
  std::size_t begin = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out.push_back(data.slice(begin, begin + len));
    begin += len;
  }
  return out;
}

double accuracy(const MlpModel& model, const LabeledDataset& data) {
  data.validate();
  if (model.output_dim() != data.classes) {
    throw DimensionError("model predicts " +
                         std::to_string(model.output_dim()) +
                         " classes, dataset has " +
                         std::to_string(data.classes));
  }
  const auto pred = argmax_rows(forward(model, data.inputs).logits());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.labels[i];
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double majority_baseline(const LabeledDataset& data) {
  data.validate();
  std::vector<std::size_t> counts(data.classes, 0);
  for (std::size_t y : data.labels) ++counts[y];
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
         static_cast<double>(data.size());
}

PretrainResult pretrain_teacher(const LabeledDataset& train,
                                const MlpSpec& spec,
                                const PretrainOptions& options,
                                const LabeledDataset* test) {
  train.validate();
  if (spec.input_dim != train.dim() || spec.output_dim != train.classes) {
    throw DimensionError("model spec does not match the dataset");
  }
  if (!(options.lr > 0.0) || options.batch < 1) {
    throw ValidationError("pretraining needs lr > 0 and batch >= 1");
  }
  Rng rng(options.seed);
  PretrainResult out;
  out.model = make_mlp(spec, rng);
  const std::size_t d = train.dim();
  for (std::size_t step = 0; step < options.steps; ++step) {
    Tensor x = Tensor::zeros(options.batch, d);
    std::vector<std::size_t> y(options.batch);
    for (std::size_t b = 0; b < options.batch; ++b) {
      const std::size_t idx = rng.uniform_index(train.size());
      auto src = train.inputs.row(idx);
      std::copy(src.begin(), src.end(), x.row(b).begin());
      y[b] = train.labels[idx];
    }
    const ForwardTrace trace = forward(out.model, x);
    const LossAndGrad lg =
        softmax_cross_entropy(trace.logits(), one_hot(y, train.classes));
    if (!std::isfinite(lg.loss)) {
      throw NumericalError("teacher pretraining diverged at step " +
                           std::to_string(step));
    }
    sgd_step_in_place(out.model, backward(out.model, trace, lg.logit_grad),
                      options.lr);
  }
  const ForwardTrace full = forward(out.model, train.inputs);
  out.final_loss =
      softmax_cross_entropy(full.logits(), one_hot(train.labels, train.classes))
          .loss;
  if (!std::isfinite(out.final_loss)) {
    throw NumericalError("teacher pretraining produced a non-finite loss");
  }
  out.train_accuracy = accuracy(out.model, train);
  if (test) out.test_accuracy = accuracy(out.model, *test);
  return out;
}

}  // namespace dpdfd
