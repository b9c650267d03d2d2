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

#ifndef DPDFD_TENSOR_H_
#define DPDFD_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dpdfd {

// Dense row-major array of doubles. Rank 1 (vectors) and rank 2 (matrices,
// one example per row) are the only shapes the library produces.
class Tensor {
 public:
  Tensor() = default;
  // Zero-filled tensor.
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor zeros(std::size_t rows, std::size_t cols);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // For rank 2: rows/cols of the matrix. A rank-1 tensor is one row.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_.back() + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_.back() + c];
  }

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;
  Tensor row_tensor(std::size_t r) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Throws ValidationError naming `what` when any entry is NaN/Inf.
void require_finite(const Tensor& t, const char* what);
// Throws DimensionError unless `t` is a matrix with the given column count.
void require_matrix(const Tensor& t, std::size_t cols, const char* what);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

double l2_norm(std::span<const double> v);

// Stacks equal-length vectors into a [n x len] matrix.
Tensor stack_rows(std::span<const Tensor> rows);
std::vector<Tensor> split_rows(const Tensor& m);

}  // namespace dpdfd

#endif  // DPDFD_TENSOR_H_
