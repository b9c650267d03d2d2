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

#include "dpdfd/tensor.h"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <utility>

#include "dpdfd/errors.h"

namespace dpdfd {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(product(shape_), 0.0) {
  for (std::size_t s : shape_) {
    if (s == 0) throw DimensionError("tensor dimensions must be positive");
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t s : shape_) {
    if (s == 0) throw DimensionError("tensor dimensions must be positive");
  }
  if (product(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_string() + " needs " +
                         std::to_string(product(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols});
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : shape_[0];
}

std::size_t Tensor::cols() const { return shape_.empty() ? 0 : shape_.back(); }

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

Tensor Tensor::row_tensor(std::size_t r) const {
  auto v = row(r);
  return Tensor::vector(std::vector<double>(v.begin(), v.end()));
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) {
    throw ValidationError(std::string(what) + " contains NaN or Inf");
  }
}

void require_matrix(const Tensor& t, std::size_t cols, const char* what) {
  if (t.rank() != 2 || t.cols() != cols) {
    throw DimensionError(std::string(what) + " must be [B x " +
                         std::to_string(cols) + "], got " + t.shape_string());
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape " + a.shape_string() +
                         " vs " + b.shape_string());
  }
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ValidationError("cannot stack an empty list");
  const std::size_t n = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * n);
  for (const Tensor& r : rows) {
    if (r.size() != n) {
      throw DimensionError("rows have different lengths: " +
                           std::to_string(n) + " vs " +
                           std::to_string(r.size()));
    }
    out.insert(out.end(), r.values().begin(), r.values().end());
  }
  return Tensor::matrix(rows.size(), n, std::move(out));
}

std::vector<Tensor> split_rows(const Tensor& m) {
  std::vector<Tensor> out;
  out.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(m.row_tensor(r));
  return out;
}

}  // namespace dpdfd
