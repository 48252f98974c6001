// Copyright 2026 The LENS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LENS_TENSOR_HPP
#define LENS_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lens {

#ifdef LENS_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/**
 * Dense row-major array of Real values.
 *
 * Vectors flowing through the model are row vectors of shape {1, n}; weight
 * matrices map inputs to outputs as {in, out}. The product of the shape always
 * equals the number of stored values.
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real{0});
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor scalar(Real value);
  static Tensor row(std::vector<Real> values);
  static Tensor row(std::initializer_list<Real> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<Real> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Rank-2 view: leading dimensions fold into rows, last dimension is columns.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  const std::vector<Real>& values() const noexcept { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  Real at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  void fill(Real value);
  void add_inplace(const Tensor& other);
  bool all_finite() const noexcept;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

// Dense kernels used by the autograd engine. All write into `out`, which must
// already have the result shape; `accumulate` adds instead of overwriting.
void gemm(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate = false);
void gemm_transpose_b(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate = false);
void gemm_transpose_a(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate = false);

Real l2_norm_squared(const Tensor& t);

}  // namespace lens

#endif  // LENS_TENSOR_HPP
