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

#ifndef DPDFD_DATASETS_H_
#define DPDFD_DATASETS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpdfd/mlp.h"
#include "dpdfd/tensor.h"

namespace dpdfd {

enum class Split { kTrain, kTest };

struct LabeledDataset {
  Tensor inputs;  // [N x d], every entry in [-1, 1]
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
  Split split = Split::kTrain;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }
  void validate() const;
  // Rows [begin, end).
  LabeledDataset slice(std::size_t begin, std::size_t end) const;
};

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset test;
};

struct BlobSpec {
  std::size_t classes = 3;
  std::size_t per_class = 500;
  std::size_t dim = 8;
  double spread = 0.5;
  std::uint64_t seed = 0;
};

// k Gaussian clusters with centers uniform in [-1, 1]^d, scaled so the
// largest |x| is 1, split 80/20 per class.
DatasetSplit make_blobs(const BlobSpec& spec);

struct GridCsvOptions {
  double pixel_min = 0.0;
  double pixel_max = 255.0;
  // When set, labels must lie in [0, classes).
  std::optional<std::size_t> classes;
};

// One example per line: label, then d pixel values. Pixels are mapped
// affinely from [pixel_min, pixel_max] to [-1, 1].
LabeledDataset load_grid_csv(const std::filesystem::path& path,
                             const GridCsvOptions& options = {});
void save_grid_csv(const LabeledDataset& data,
                   const std::filesystem::path& path,
                   const GridCsvOptions& options = {});

// Splits the rows into `parts` disjoint contiguous shards.
std::vector<LabeledDataset> partition(const LabeledDataset& data,
                                      std::size_t parts);

double accuracy(const MlpModel& model, const LabeledDataset& data);
// Share of the most frequent label.
double majority_baseline(const LabeledDataset& data);

struct PretrainOptions {
  std::size_t steps = 2000;
  double lr = 0.1;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  MlpModel model;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
  double final_loss = 0.0;
};

// Plain minibatch SGD on cross-entropy. No privacy accounting.
PretrainResult pretrain_teacher(const LabeledDataset& train,
                                const MlpSpec& spec,
                                const PretrainOptions& options,
                                const LabeledDataset* test = nullptr);

}  // namespace dpdfd

#endif  // DPDFD_DATASETS_H_
