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

#ifndef LENS_AUTOGRAD_HPP
#define LENS_AUTOGRAD_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lens/tensor.hpp"

namespace lens {

/// A trainable tensor together with its gradient accumulator.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value, bool trainable = true);

  std::string name;
  Tensor value;
  // Accumulated by Graph::backward even through a const Parameter: gradients
  // are not part of the parameter snapshot shared by inference.
  mutable Tensor grad;  // same shape as value
  bool trainable = true;

  void zero_grad() const { grad.fill(Real{0}); }
};

namespace ad {

enum class OpKind : std::uint8_t {
  kConstant,
  kParameter,
  kGatherRow,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSigmoid,
  kTanh,
  kSoftplus,
  kRelu,
  kAbs,
  kSquare,
  kConcat,
  kSlice,
  kMean,
  kSum,
  kSoftmaxCrossEntropy,
};

const char* op_name(OpKind op);

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return graph_ != nullptr; }
  std::size_t id() const noexcept { return id_; }
  Graph& graph() const { return *graph_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Real item() const;  // value of a single-element node

  /// Node-local gradient after backward(); zeros if the node was not reached.
  Tensor grad() const;

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/**
 * Dynamic reverse-mode differentiation graph.
 *
 * Nodes are appended in evaluation order, so creation order is a topological
 * order and backward() is a single reverse sweep. Parameter leaves read the
 * parameter tensor in place and backward() accumulates straight into
 * Parameter::grad; frozen parameters (trainable == false) never receive
 * gradient. A graph built with record_gradients == false only evaluates.
 */
class Graph {
 public:
  explicit Graph(bool record_gradients = true) : record_(record_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor value);
  Var parameter(const Parameter& param);
  /// Row `row` of a {rows, dim} table as a {1, dim} node.
  Var gather_row(const Parameter& table, std::size_t row);

  /// Propagates d(loss)/d(node) to every reachable node and adds parameter
  /// gradients into Parameter::grad. Node-local gradients are reset on each
  /// call; parameter gradients accumulate across calls.
  void backward(Var loss);

  // Used by the free-function operators below.
  Var push(OpKind op, Tensor value, std::initializer_list<Var> parents);
  Var push(OpKind op, Tensor value, std::span<const Var> parents);
  void set_aux(Var v, std::size_t aux, Real scalar = Real{0});
  void set_cache(Var v, Tensor cache);

  const Tensor& value_of(std::size_t id) const;
  Tensor grad_of(std::size_t id) const;

 private:
  struct Node {
    OpKind op = OpKind::kConstant;
    Tensor value;
    Tensor grad;
    Tensor cache;
    std::vector<std::size_t> parents;
    const Parameter* param = nullptr;
    std::size_t aux = 0;
    Real scalar = 0;
    bool requires_grad = false;
  };

  Tensor* grad_target(std::size_t id);
  void backward_node(std::size_t id);

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real factor);
Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var relu(Var a);
Var abs(Var a);
Var square(Var a);
/// Concatenation along the last axis; all parts share the leading rows.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
/// Columns [offset, offset + count) along the last axis.
Var slice(Var a, std::size_t offset, std::size_t count);
Var mean(Var a);
Var sum(Var a);
/// -log softmax(logits)[target] over all elements of `logits`.
Var softmax_cross_entropy(Var logits, std::size_t target);

/// Numerically stable softmax over all elements.
std::vector<Real> softmax(std::span<const Real> logits);

}  // namespace ad
}  // namespace lens

#endif  // LENS_AUTOGRAD_HPP
