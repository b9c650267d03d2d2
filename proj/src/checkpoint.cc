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

#include "dpdfd/checkpoint.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dpdfd/errors.h"

namespace dpdfd {

using nlohmann::json;

std::string model_to_json(const MlpModel& model) {
  model.validate();
  json doc;
  doc["format"] = "dpdfd-mlp";
  doc["version"] = 1;
  doc["input_dim"] = model.input_dim();
  doc["output_dim"] = model.output_dim();
  json layers = json::array();
  for (const Layer& l : model.layers) {
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"activation", activation_name(l.activation)},
                      {"weight", l.weight.storage()},
                      {"bias", l.bias.storage()}});
  }
  doc["layers"] = std::move(layers);
  return doc.dump();
}

MlpModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format") != "dpdfd-mlp") {
      throw IoError("not a dpdfd-mlp checkpoint");
    }
    if (doc.at("version") != 1) {
      throw IoError("unsupported checkpoint version");
    }
    MlpModel model;
    for (const json& jl : doc.at("layers")) {
      const auto in = jl.at("in").get<std::size_t>();
      const auto out = jl.at("out").get<std::size_t>();
      Layer l;
      l.activation =
          parse_activation(jl.at("activation").get<std::string>());
      l.weight = Tensor::matrix(out, in, jl.at("weight").get<std::vector<double>>());
      l.bias = Tensor({out}, jl.at("bias").get<std::vector<double>>());
      model.layers.push_back(std::move(l));
    }
    model.validate();
    if (model.input_dim() != doc.at("input_dim").get<std::size_t>() ||
        model.output_dim() != doc.at("output_dim").get<std::size_t>()) {
      throw IoError("checkpoint dims disagree with its layers");
    }
    return model;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  const std::string text = model_to_json(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace dpdfd
