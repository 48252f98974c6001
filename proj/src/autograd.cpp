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

#include "lens/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lens/error.hpp"

namespace lens {

Parameter::Parameter(std::string name_, Tensor value_, bool trainable_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape()), trainable(trainable_) {}

namespace ad {

namespace {

Real sigmoid_scalar(Real x) {
  if (x >= 0) return Real{1} / (Real{1} + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real{1} + e);
}

Real softplus_scalar(Real x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
  }
}

void require_same_graph(const Var& a, const Var& b) {
  if (&a.graph() != &b.graph()) throw Error("operands belong to different graphs");
}

template <typename F>
Var unary(Var a, OpKind op, F&& f) {
  Tensor out(a.shape());
  const auto in = a.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(in[i]);
  return a.graph().push(op, std::move(out), {a});
}

template <typename F>
Var binary(Var a, Var b, OpKind op, const char* name, F&& f) {
  require_same_graph(a, b);
  require_same_shape(a, b, name);
  Tensor out(a.shape());
  const auto x = a.value().data();
  const auto y = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i], y[i]);
  return a.graph().push(op, std::move(out), {a, b});
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kGatherRow: return "gather_row";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kRelu: return "relu";
    case OpKind::kAbs: return "abs";
    case OpKind::kSquare: return "square";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->value_of(id_); }

Real Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("item() on non-scalar of shape " + shape_to_string(v.shape()));
  return v[0];
}

Tensor Var::grad() const { return graph_->grad_of(id_); }

const Tensor& Graph::value_of(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.op == OpKind::kParameter ? n.param->value : n.value;
}

Tensor Graph::grad_of(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.op == OpKind::kParameter) return n.param->grad;
  if (n.grad.empty()) return Tensor(value_of(id).shape());
  return n.grad;
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = OpKind::kConstant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(const Parameter& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.op = OpKind::kParameter;
  n.param = &param;
  n.requires_grad = record_ && param.trainable;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&param, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::gather_row(const Parameter& table, std::size_t row) {
  const Tensor& t = table.value;
  if (t.rank() != 2) throw ShapeError("gather_row: table " + table.name + " is not a matrix");
  if (row >= t.rows()) {
    throw Error("gather_row: index " + std::to_string(row) + " out of range for table " +
                table.name + " with " + std::to_string(t.rows()) + " rows");
  }
  const std::size_t dim = t.cols();
  Tensor out({1, dim});
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(row * dim), dim, out.data().begin());
  Node n;
  n.op = OpKind::kGatherRow;
  n.value = std::move(out);
  n.param = &table;
  n.aux = row;
  n.requires_grad = record_ && table.trainable;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::push(OpKind op, Tensor value, std::initializer_list<Var> parents) {
  return push(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()));
}

Var Graph::push(OpKind op, Tensor value, std::span<const Var> parents) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (p.graph_ != this) throw Error(std::string(op_name(op)) + ": operand from another graph");
    n.parents.push_back(p.id_);
    n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::set_aux(Var v, std::size_t aux, Real scalar) {
  nodes_.at(v.id()).aux = aux;
  nodes_.at(v.id()).scalar = scalar;
}

void Graph::set_cache(Var v, Tensor cache) { nodes_.at(v.id()).cache = std::move(cache); }

Tensor* Graph::grad_target(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.op == OpKind::kParameter) return &n.param->grad;
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return &n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw Error("backward: loss belongs to another graph");
  if (!record_) throw Error("backward: graph was built without gradient recording");
  const Tensor& lv = value_of(loss.id_);
  if (lv.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_to_string(lv.shape()));
  }
  for (Node& n : nodes_) {
    if (n.op != OpKind::kParameter && !n.grad.empty()) n.grad.fill(Real{0});
  }
  Node& root = nodes_[loss.id_];
  if (!root.requires_grad) return;
  if (root.op == OpKind::kParameter) {
    root.param->grad[0] += Real{1};
    return;
  }
  if (root.grad.empty()) root.grad = Tensor(root.value.shape());
  root.grad[0] = Real{1};
  for (std::size_t id = loss.id_ + 1; id-- > 0;) backward_node(id);
}

void Graph::backward_node(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad || n.grad.empty()) return;
  if (n.op == OpKind::kConstant || n.op == OpKind::kParameter) return;
  const Tensor& g = n.grad;
  const auto gd = g.data();

  switch (n.op) {
    case OpKind::kGatherRow: {
      Tensor& table_grad = n.param->grad;
      const std::size_t dim = g.size();
      auto dst = table_grad.data().subspan(n.aux * dim, dim);
      for (std::size_t i = 0; i < dim; ++i) dst[i] += gd[i];
      break;
    }
    case OpKind::kMatMul: {
      const std::size_t a = n.parents[0], b = n.parents[1];
      if (Tensor* ga = grad_target(a)) gemm_transpose_b(g, value_of(b), *ga, true);
      if (Tensor* gb = grad_target(b)) gemm_transpose_a(value_of(a), g, *gb, true);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      const Real sign_b = n.op == OpKind::kAdd ? Real{1} : Real{-1};
      if (Tensor* ga = grad_target(n.parents[0])) {
        auto d = ga->data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i];
      }
      if (Tensor* gb = grad_target(n.parents[1])) {
        auto d = gb->data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += sign_b * gd[i];
      }
      break;
    }
    case OpKind::kMul: {
      const std::size_t a = n.parents[0], b = n.parents[1];
      if (Tensor* ga = grad_target(a)) {
        auto d = ga->data();
        const auto y = value_of(b).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * y[i];
      }
      if (Tensor* gb = grad_target(b)) {
        auto d = gb->data();
        const auto x = value_of(a).data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * x[i];
      }
      break;
    }
    case OpKind::kScale: {
      if (Tensor* ga = grad_target(n.parents[0])) {
        auto d = ga->data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += n.scalar * gd[i];
      }
      break;
    }
    case OpKind::kSigmoid:
    case OpKind::kTanh:
    case OpKind::kSoftplus:
    case OpKind::kRelu:
    case OpKind::kAbs:
    case OpKind::kSquare: {
      Tensor* ga = grad_target(n.parents[0]);
      if (ga == nullptr) break;
      auto d = ga->data();
      const auto y = n.value.data();
      const auto x = value_of(n.parents[0]).data();
      for (std::size_t i = 0; i < d.size(); ++i) {
        Real local = 0;
        switch (n.op) {
          case OpKind::kSigmoid: local = y[i] * (Real{1} - y[i]); break;
          case OpKind::kTanh: local = Real{1} - y[i] * y[i]; break;
          case OpKind::kSoftplus: local = sigmoid_scalar(x[i]); break;
          case OpKind::kRelu: local = x[i] > 0 ? Real{1} : Real{0}; break;
          case OpKind::kAbs: local = x[i] > 0 ? Real{1} : (x[i] < 0 ? Real{-1} : Real{0}); break;
          case OpKind::kSquare: local = Real{2} * x[i]; break;
          default: break;
        }
        d[i] += gd[i] * local;
      }
      break;
    }
    case OpKind::kConcat: {
      const std::size_t rows = g.rows();
      const std::size_t total = g.cols();
      std::size_t offset = 0;
      for (std::size_t p : n.parents) {
        const std::size_t width = value_of(p).cols();
        if (Tensor* gp = grad_target(p)) {
          auto d = gp->data();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < width; ++c) d[r * width + c] += gd[r * total + offset + c];
          }
        }
        offset += width;
      }
      break;
    }
    case OpKind::kSlice: {
      Tensor* ga = grad_target(n.parents[0]);
      if (ga == nullptr) break;
      const std::size_t rows = g.rows();
      const std::size_t width = g.cols();
      const std::size_t total = ga->cols();
      auto d = ga->data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < width; ++c) d[r * total + n.aux + c] += gd[r * width + c];
      }
      break;
    }
    case OpKind::kMean:
    case OpKind::kSum: {
      Tensor* ga = grad_target(n.parents[0]);
      if (ga == nullptr) break;
      auto d = ga->data();
      const Real step = n.op == OpKind::kMean ? gd[0] / static_cast<Real>(d.size()) : gd[0];
      for (Real& v : d) v += step;
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      Tensor* ga = grad_target(n.parents[0]);
      if (ga == nullptr) break;
      auto d = ga->data();
      const auto p = n.cache.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[0] * p[i];
      d[n.aux] -= gd[0];
      break;
    }
    case OpKind::kConstant:
    case OpKind::kParameter:
      break;
  }
}

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_to_string(av.shape()) + " by " +
                     shape_to_string(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  gemm(av, bv, out);
  return a.graph().push(OpKind::kMatMul, std::move(out), {a, b});
}

Var add(Var a, Var b) {
  return binary(a, b, OpKind::kAdd, "add", [](Real x, Real y) { return x + y; });
}

Var sub(Var a, Var b) {
  return binary(a, b, OpKind::kSub, "sub", [](Real x, Real y) { return x - y; });
}

Var mul(Var a, Var b) {
  return binary(a, b, OpKind::kMul, "mul", [](Real x, Real y) { return x * y; });
}

Var scale(Var a, Real factor) {
  Var out = unary(a, OpKind::kScale, [factor](Real x) { return factor * x; });
  a.graph().set_aux(out, 0, factor);
  return out;
}

Var sigmoid(Var a) { return unary(a, OpKind::kSigmoid, sigmoid_scalar); }

Var tanh(Var a) {
  return unary(a, OpKind::kTanh, [](Real x) { return std::tanh(x); });
}

Var softplus(Var a) { return unary(a, OpKind::kSoftplus, softplus_scalar); }

Var relu(Var a) {
  return unary(a, OpKind::kRelu, [](Real x) { return x > 0 ? x : Real{0}; });
}

Var abs(Var a) {
  return unary(a, OpKind::kAbs, [](Real x) { return std::abs(x); });
}

Var square(Var a) {
  return unary(a, OpKind::kSquare, [](Real x) { return x * x; });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Graph& g = parts.front().graph();
  const std::size_t rows = parts.front().value().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (&p.graph() != &g) throw Error("concat: operands belong to different graphs");
    if (p.value().rank() != 2 || p.value().rows() != rows) {
      throw ShapeError("concat: operand shape " + shape_to_string(p.shape()) +
                       " incompatible with " + shape_to_string(parts.front().shape()));
    }
    total += p.value().cols();
  }
  Tensor out({rows, total});
  auto o = out.data();
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto src = p.value().data();
    const std::size_t width = p.value().cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r * width), width,
                  o.begin() + static_cast<std::ptrdiff_t>(r * total + offset));
    }
    offset += width;
  }
  return g.push(OpKind::kConcat, std::move(out), parts);
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice(Var a, std::size_t offset, std::size_t count) {
  const Tensor& av = a.value();
  if (av.rank() != 2 || offset + count > av.cols()) {
    throw ShapeError("slice: columns [" + std::to_string(offset) + ", " +
                     std::to_string(offset + count) + ") out of range for " +
                     shape_to_string(av.shape()));
  }
  const std::size_t rows = av.rows();
  Tensor out({rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < count; ++c) out.at(r, c) = av.at(r, offset + c);
  }
  Var v = a.graph().push(OpKind::kSlice, std::move(out), {a});
  a.graph().set_aux(v, offset);
  return v;
}

Var mean(Var a) {
  const auto d = a.value().data();
  if (d.empty()) throw ShapeError("mean: empty tensor");
  Real total = 0;
  for (Real v : d) total += v;
  return a.graph().push(OpKind::kMean, Tensor::scalar(total / static_cast<Real>(d.size())), {a});
}

Var sum(Var a) {
  Real total = 0;
  for (Real v : a.value().data()) total += v;
  return a.graph().push(OpKind::kSum, Tensor::scalar(total), {a});
}

std::vector<Real> softmax(std::span<const Real> logits) {
  std::vector<Real> p(logits.size());
  if (logits.empty()) return p;
  const Real peak = *std::max_element(logits.begin(), logits.end());
  Real total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    total += p[i];
  }
  for (Real& v : p) v /= total;
  return p;
}

Var softmax_cross_entropy(Var logits, std::size_t target) {
  const auto z = logits.value().data();
  if (z.size() < 2) throw ShapeError("softmax_cross_entropy: need at least 2 classes");
  if (target >= z.size()) {
    throw Error("softmax_cross_entropy: target " + std::to_string(target) +
                " out of range for " + std::to_string(z.size()) + " classes");
  }
  const Real peak = *std::max_element(z.begin(), z.end());
  Real total = 0;
  for (Real v : z) total += std::exp(v - peak);
  const Real log_norm = peak + std::log(total);
  const Real loss = log_norm - z[target];
  Var out = logits.graph().push(OpKind::kSoftmaxCrossEntropy, Tensor::scalar(loss), {logits});
  if (logits.graph().recording()) {
    Tensor probs(logits.shape());
    auto p = probs.data();
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - log_norm);
    logits.graph().set_cache(out, std::move(probs));
  }
  logits.graph().set_aux(out, target);
  return out;
}

}  // namespace ad
}  // namespace lens
