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

#ifndef DPDFD_ERRORS_H_
#define DPDFD_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpdfd {

enum class ErrorKind {
  kDimension,
  kValidation,
  kDomain,
  kDegenerate,
  kInfeasible,
  kNumerical,
  kIo,
};

std::string_view error_kind_name(ErrorKind kind);

// Base of every error thrown by the library. The kind selects the CLI exit
// code (see cli.h).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m)
      : Error(ErrorKind::kDimension, m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m)
      : Error(ErrorKind::kValidation, m) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& m) : Error(ErrorKind::kDomain, m) {}
};

class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& m)
      : Error(ErrorKind::kDegenerate, m) {}
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& m)
      : Error(ErrorKind::kInfeasible, m) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& m)
      : Error(ErrorKind::kNumerical, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::kIo, m) {}
};

}  // namespace dpdfd

#endif  // DPDFD_ERRORS_H_
