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

#ifndef DPDFD_CLI_H_
#define DPDFD_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpdfd/errors.h"

namespace dpdfd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitNumerical = 4;
inline constexpr int kExitInternal = 1;

int exit_code(ErrorKind kind);

// Every config key with its default value. A config file is a flat JSON
// object over these keys.
nlohmann::json default_config();

// Overlays `overrides` on `base`, rejecting unknown keys.
nlohmann::json merge_config(nlohmann::json base,
                            const nlohmann::json& overrides);

// Runs one command line (args[0] is the program name). Normal output goes to
// `out`; failures print {"error": kind, "message": ...} to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);
int main(int argc, char** argv);

}  // namespace dpdfd::cli

#endif  // DPDFD_CLI_H_
