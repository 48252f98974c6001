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

#ifndef LENS_CHECKPOINT_HPP
#define LENS_CHECKPOINT_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "lens/model.hpp"
#include "lens/optimizer.hpp"

namespace lens {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct OptimizerSnapshot {
  RmsPropOptions options;
  long long steps = 0;
  std::map<std::string, Tensor> accumulators;
};

/// Everything a "LENSCKPT" container holds.
struct Checkpoint {
  LensModel model;
  std::map<std::string, std::string> metadata;  // split seed, objective, vocabulary fingerprint, ...
  std::optional<OptimizerSnapshot> optimizer;
};

/**
 * Layout (little-endian):
 *   "LENSCKPT" | u32 version | u8 bytes-per-real
 *   model config fields | u32 n, n x (str key, str value) metadata
 *   u32 n, n x (str name, u8 trainable, u32 rank, u64 dims..., raw values)
 *   u8 has-optimizer [f64 lr, f64 decay, f64 eps, i64 steps, u32 n, n x named tensors]
 */
void write_checkpoint(std::ostream& out, const LensModel& model,
                      const std::map<std::string, std::string>& metadata = {},
                      const RmsProp* optimizer = nullptr);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const LensModel& model,
                     const std::map<std::string, std::string>& metadata = {},
                     const RmsProp* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads into an existing model, rejecting any tensor whose shape differs.
std::map<std::string, std::string> load_checkpoint_into(const std::filesystem::path& path, LensModel& model);

}  // namespace lens

#endif  // LENS_CHECKPOINT_HPP
