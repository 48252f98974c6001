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

#ifndef LENS_OPTIMIZER_HPP
#define LENS_OPTIMIZER_HPP

#include <map>
#include <span>
#include <string>

#include "lens/autograd.hpp"

namespace lens {

struct RmsPropOptions {
  Real learning_rate = Real(0.001);
  Real decay = Real(0.9);
  Real epsilon = Real(1e-8);
};

/**
 * RMSprop with the squared-gradient accumulator kept per parameter name:
 *
 *   s <- decay * s + (1 - decay) * g^2
 *   p <- p - lr * g / sqrt(s + eps)
 *
 * Frozen parameters are skipped entirely.
 */
class RmsProp {
 public:
  explicit RmsProp(RmsPropOptions options = {});

  void step(std::span<Parameter* const> params);

  const RmsPropOptions& options() const noexcept { return options_; }
  const std::map<std::string, Tensor>& accumulators() const noexcept { return accumulators_; }
  std::map<std::string, Tensor>& accumulators() noexcept { return accumulators_; }
  long long steps() const noexcept { return steps_; }

 private:
  RmsPropOptions options_;
  std::map<std::string, Tensor> accumulators_;
  long long steps_ = 0;
};

/// Global L2 norm over the gradients of trainable parameters.
Real global_grad_norm(std::span<Parameter* const> params);

/// Rescales all trainable gradients so their global norm is at most
/// `max_norm`. Returns the norm measured before clipping.
Real clip_global_norm(std::span<Parameter* const> params, Real max_norm);

}  // namespace lens

#endif  // LENS_OPTIMIZER_HPP
