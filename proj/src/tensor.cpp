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

#include "lens/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "lens/error.hpp"

namespace lens {

namespace {

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void require_out_shape(const Tensor& out, std::size_t rows, std::size_t cols, const char* op) {
  if (out.rows() != rows || out.cols() != cols) {
    std::ostringstream msg;
    msg << op << ": output has shape " << shape_to_string(out.shape()) << ", expected [" << rows
        << ", " << cols << "]";
    throw ShapeError(msg.str());
  }
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<Real> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_to_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::scalar(Real value) { return Tensor({1, 1}, std::vector<Real>{value}); }

Tensor Tensor::row(std::vector<Real> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::row(std::initializer_list<Real> values) {
  return row(std::vector<Real>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<Real> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.empty()) return 1;
  return shape_size(shape_) / (shape_.back() == 0 ? 1 : shape_.back());
}

std::size_t Tensor::cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }

void Tensor::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add_inplace(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("add_inplace: " + shape_to_string(shape_) + " vs " +
                     shape_to_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

void gemm(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  }
  require_out_shape(out, a.rows(), b.cols(), "matmul");
  auto o = as_matrix(out);
  if (accumulate) {
    o.noalias() += as_matrix(a) * as_matrix(b);
  } else {
    o.noalias() = as_matrix(a) * as_matrix(b);
  }
}

void gemm_transpose_b(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul (b transposed): " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  require_out_shape(out, a.rows(), b.rows(), "matmul (b transposed)");
  auto o = as_matrix(out);
  if (accumulate) {
    o.noalias() += as_matrix(a) * as_matrix(b).transpose();
  } else {
    o.noalias() = as_matrix(a) * as_matrix(b).transpose();
  }
}

void gemm_transpose_a(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul (a transposed): " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  require_out_shape(out, a.cols(), b.cols(), "matmul (a transposed)");
  auto o = as_matrix(out);
  if (accumulate) {
    o.noalias() += as_matrix(a).transpose() * as_matrix(b);
  } else {
    o.noalias() = as_matrix(a).transpose() * as_matrix(b);
  }
}

Real l2_norm_squared(const Tensor& t) {
  Real total = 0;
  for (Real v : t.data()) total += v * v;
  return total;
}

}  // namespace lens
