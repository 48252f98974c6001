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

#include "lens/optimizer.hpp"

#include <cmath>

#include "lens/error.hpp"

namespace lens {

RmsProp::RmsProp(RmsPropOptions options) : options_(options) {
  if (!(options_.learning_rate > 0)) throw ConfigError("RMSprop learning rate must be positive");
  if (options_.decay < 0 || options_.decay >= 1) throw ConfigError("RMSprop decay must be in [0, 1)");
}

void RmsProp::step(std::span<Parameter* const> params) {
  const Real decay = options_.decay;
  const Real lr = options_.learning_rate;
  const Real eps = options_.epsilon;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    if (p->grad.shape() != p->value.shape()) {
      throw ShapeError("rmsprop: gradient of " + p->name + " has shape " +
                       shape_to_string(p->grad.shape()) + ", parameter " +
                       shape_to_string(p->value.shape()));
    }
    auto [it, inserted] = accumulators_.try_emplace(p->name, p->value.shape());
    Tensor& acc = it->second;
    if (acc.shape() != p->value.shape()) {
      throw ShapeError("rmsprop: accumulator for " + p->name + " has shape " +
                       shape_to_string(acc.shape()));
    }
    auto s = acc.data();
    auto w = p->value.data();
    const auto g = p->grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      s[i] = decay * s[i] + (Real{1} - decay) * g[i] * g[i];
      w[i] -= lr * g[i] / std::sqrt(s[i] + eps);
    }
  }
  ++steps_;
}

Real global_grad_norm(std::span<Parameter* const> params) {
  Real total = 0;
  for (const Parameter* p : params) {
    if (p->trainable) total += l2_norm_squared(p->grad);
  }
  return std::sqrt(total);
}

Real clip_global_norm(std::span<Parameter* const> params, Real max_norm) {
  if (!(max_norm > 0)) throw ConfigError("clip norm must be positive");
  const Real norm = global_grad_norm(params);
  if (norm > max_norm) {
    const Real factor = max_norm / norm;
    for (Parameter* p : params) {
      if (!p->trainable) continue;
      for (Real& v : p->grad.data()) v *= factor;
    }
  }
  return norm;
}

}  // namespace lens
