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

#ifndef LENS_RUN_CONFIG_HPP
#define LENS_RUN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lens/anomaly.hpp"
#include "lens/data.hpp"
#include "lens/model.hpp"
#include "lens/training.hpp"

namespace lens {

/// Architecture selection: a preset plus optional per-field overrides.
struct ModelSection {
  std::string preset = "lens1000";
  std::optional<std::size_t> sce_layers, sce_cells, fbe_layers, fbe_cells, item_dim, user_dim, tte_hidden,
      decode_max_items;
  std::optional<bool> sce_bidirectional, fbe_bidirectional;
  std::optional<std::vector<std::size_t>> nsd_cell_sizes;

  ModelConfig resolve(std::size_t vocab_size, std::size_t user_count) const;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::filesystem::path output_dir = "runs";
  std::string run_name;  // empty: "<command>-<UTC stamp>"
  std::size_t workers = 1;

  std::filesystem::path raw_path;
  std::filesystem::path store_path;
  std::filesystem::path checkpoint_path;

  data::CsvSchema schema;
  ModelSection model;
  TrainRunConfig training;
  double holdout_fraction = 0.3;
  std::size_t k_max = 10;
  anomaly::AnomalyConfig anomaly;
};

/// Parses YAML text; unknown keys and ill-typed values raise ConfigError.
/// `overrides` are "dotted.key=value" pairs applied before parsing.
RunConfig parse_run_config(const std::string& yaml, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Every resolved setting, in the same layout parse_run_config accepts.
std::string run_config_yaml(const RunConfig& config);

}  // namespace lens

#endif  // LENS_RUN_CONFIG_HPP
