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

#ifndef LENS_EMBEDDING_HPP
#define LENS_EMBEDDING_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "lens/autograd.hpp"
#include "lens/data.hpp"

namespace lens {

enum class EmbeddingKind : std::uint8_t { kItem, kUser };

inline constexpr double kColdInitRange = 0.05;

/// Item or user latent table; a frozen table never receives gradient.
struct EmbeddingTable {
  EmbeddingKind kind = EmbeddingKind::kItem;
  Parameter matrix;  // {rows, dim}

  std::size_t rows() const noexcept { return matrix.value.rows(); }
  std::size_t dim() const noexcept { return matrix.value.cols(); }
  bool trainable() const noexcept { return matrix.trainable; }
};

/// i.i.d. uniform values on [-0.05, 0.05], deterministic in `seed`.
EmbeddingTable init_cold(EmbeddingKind kind, std::size_t rows, std::size_t dim,
                         std::uint64_t seed, std::string name = {});

struct WarmStartReport {
  std::size_t loaded = 0;
  std::size_t cold_fallback = 0;  // vocabulary items absent from the file
  std::size_t unused = 0;         // file rows naming items outside the vocabulary
};

/**
 * Loads pre-trained item vectors from a text file:
 *
 *   dim=<n>
 *   <item> <v1> ... <vn>
 *
 * Items missing from the file (and the reserved rows) keep a cold init drawn
 * from `seed`. The table is trainable only when `fine_tune` is set.
 */
EmbeddingTable load_warm(const std::filesystem::path& path, const data::ItemVocab& vocab,
                         std::size_t dim, bool fine_tune, std::uint64_t seed,
                         WarmStartReport* report = nullptr);

/// Differentiable row lookup; backward touches only the selected row.
ad::Var lookup(ad::Graph& graph, const EmbeddingTable& table, std::size_t index);

}  // namespace lens

#endif  // LENS_EMBEDDING_HPP
