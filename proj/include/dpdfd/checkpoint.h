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

#ifndef DPDFD_CHECKPOINT_H_
#define DPDFD_CHECKPOINT_H_

#include <filesystem>
#include <string>

#include "dpdfd/mlp.h"

namespace dpdfd {

// JSON checkpoint: {"format": "dpdfd-mlp", "version": 1, "input_dim",
// "output_dim", "layers": [{"in", "out", "activation", "weight", "bias"}]}.
// Doubles are written in shortest round-trip form, so
// load(save(m)) == m bit-exactly.
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace dpdfd

#endif  // DPDFD_CHECKPOINT_H_
