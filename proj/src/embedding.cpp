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

#include "lens/embedding.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lens/error.hpp"
#include "lens/random.hpp"

namespace lens {

EmbeddingTable init_cold(EmbeddingKind kind, std::size_t rows, std::size_t dim,
                         std::uint64_t seed, std::string name) {
  if (rows == 0 || dim == 0) throw ConfigError("embedding table needs rows >= 1 and dim >= 1");
  if (name.empty()) name = kind == EmbeddingKind::kItem ? "embed.items" : "embed.users";
  Tensor values({rows, dim});
  Rng rng(seed);
  fill_uniform(values, rng, -kColdInitRange, kColdInitRange);
  return EmbeddingTable{kind, Parameter(std::move(name), std::move(values), true)};
}

EmbeddingTable load_warm(const std::filesystem::path& path, const data::ItemVocab& vocab,
                         std::size_t dim, bool fine_tune, std::uint64_t seed,
                         WarmStartReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read warm-start embeddings " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty warm-start file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::size_t file_dim = 0;
  if (line.rfind("dim=", 0) != 0 ||
      std::from_chars(line.data() + 4, line.data() + line.size(), file_dim).ec != std::errc()) {
    throw DataError(path.string() + ": first line must be \"dim=<n>\"");
  }
  if (file_dim != dim) {
    throw ConfigError(path.string() + ": file dim " + std::to_string(file_dim) +
                      " does not match embedding dim " + std::to_string(dim));
  }

  EmbeddingTable table = init_cold(EmbeddingKind::kItem, vocab.size(), dim, seed);
  table.matrix.trainable = fine_tune;
  std::vector<bool> seen(vocab.size(), false);
  WarmStartReport rep;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string item;
    if (!(fields >> item)) continue;
    std::vector<Real> values;
    std::string token;
    while (fields >> token) {
      double v = 0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad value \"" + token + "\"");
      }
      values.push_back(static_cast<Real>(v));
    }
    if (values.size() != dim) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": vector for \"" + item +
                        "\" has " + std::to_string(values.size()) + " values, expected dim " +
                        std::to_string(dim));
    }
    const auto idx = vocab.find(item);
    if (!idx) {
      ++rep.unused;
      continue;
    }
    std::copy(values.begin(), values.end(),
              table.matrix.value.data().begin() + static_cast<std::ptrdiff_t>(*idx * dim));
    if (!seen[*idx]) ++rep.loaded;
    seen[*idx] = true;
  }
  for (std::size_t i = data::kFirstItem; i < vocab.size(); ++i) {
    if (!seen[i]) ++rep.cold_fallback;
  }
  if (report) *report = rep;
  return table;
}

ad::Var lookup(ad::Graph& graph, const EmbeddingTable& table, std::size_t index) {
  return graph.gather_row(table.matrix, index);
}

}  // namespace lens
