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

#ifndef LENS_MODEL_HPP
#define LENS_MODEL_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lens/autograd.hpp"
#include "lens/data.hpp"
#include "lens/embedding.hpp"

namespace lens {

/// Architecture hyperparameters. "lens1000" and "lens2000" are the reference
/// layouts; "toy" is a desk-scale variant for tests.
struct ModelConfig {
  std::size_t sce_layers = 1;
  std::size_t sce_cells = 64;
  bool sce_bidirectional = true;
  std::size_t fbe_layers = 1;
  std::size_t fbe_cells = 256;
  bool fbe_bidirectional = true;
  std::size_t nsd_layers = 1;
  std::vector<std::size_t> nsd_cell_sizes{512};
  std::size_t item_dim = 64;
  std::size_t user_dim = 32;
  std::size_t vocab_size = 0;  // reserved PAD/UNK/EOB rows included
  std::size_t user_count = 0;
  std::size_t decode_max_items = 10;
  std::size_t tte_hidden = 64;

  std::size_t sce_output_dim() const { return sce_cells * (sce_bidirectional ? 2 : 1); }
  std::size_t fbe_input_dim() const { return sce_output_dim() + data::kFeatureDim + user_dim; }
  /// Width of the funnel state handed to the decoder and the regression head.
  std::size_t state_dim() const { return fbe_cells * (fbe_bidirectional ? 2 : 1); }

  /// Throws ConfigError when counts are zero or nsd_cell_sizes disagrees with nsd_layers.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// "lens1000", "lens2000" or "toy"; item_dim defaults to the SCE cell size.
ModelConfig model_preset(std::string_view name, std::size_t vocab_size, std::size_t user_count);
std::vector<std::string> preset_names();

/// Fused LSTM weights: x|h -> [input, forget, candidate, output] gates.
struct LstmWeights {
  Parameter weight;  // {input + hidden, 4 * hidden}
  Parameter bias;    // {1, 4 * hidden}

  std::size_t hidden() const { return bias.value.cols() / 4; }
};

/// One recurrent layer: a forward direction and, if bidirectional, a backward one.
struct RecurrentLayer {
  std::vector<LstmWeights> directions;
};

struct DenseWeights {
  Parameter weight;  // {in, out}
  Parameter bias;    // {1, out}
};

struct ModelParams {
  EmbeddingTable items;
  EmbeddingTable users;
  std::vector<RecurrentLayer> sce;
  std::vector<RecurrentLayer> fbe;
  std::vector<LstmWeights> nsd;
  std::vector<DenseWeights> nsd_init;  // funnel state -> initial hidden state per NSD layer
  DenseWeights nsd_out;                // top NSD hidden -> vocabulary logits
  DenseWeights tte_hidden;
  DenseWeights tte_out;

  /// Every parameter in a fixed order (the checkpoint and optimizer order).
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t parameter_count() const;
  void zero_grad() const;
};

/// Weights uniform on [-0.05, 0.05], biases zero except forget gates at 1.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Trainable scalar count implied by the config alone.
std::size_t parameter_count(const ModelConfig& config);

struct LensModel {
  ModelConfig config;
  ModelParams params;

  static LensModel create(const ModelConfig& config, std::uint64_t seed);
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

/// c' = f*c + i*g, h' = o*tanh(c') with sigmoid gates i, f, o and tanh candidate g.
LstmState lstm_cell(ad::Graph& graph, ad::Var x, const LstmState& state, const LstmWeights& weights);

/// Final hidden states of both directions over the basket's item embeddings.
ad::Var sce_encode(ad::Graph& graph, const LensModel& model, const data::Session& session);

/// Runs the funnel encoder over per-session inputs [session vector | features | user].
ad::Var fbe_encode(ad::Graph& graph, const LensModel& model, std::span<const ad::Var> session_vectors,
                   std::span<const data::SessionFeatures> features, ad::Var user_embedding);

/// FunnelState for sessions [0, prefix_length) of `funnel`.
ad::Var encode_funnel(ad::Graph& graph, const LensModel& model, const data::Funnel& funnel,
                      std::size_t prefix_length);

/// No-gradient FunnelState as a {1, state_dim} tensor.
Tensor funnel_state(const LensModel& model, const data::Funnel& funnel, std::size_t prefix_length);

/// Mean per-step cross-entropy of the target basket followed by EOB, feeding
/// the previous target item at each step (zero vector at step 0).
ad::Var nsd_teacher_forced_loss(ad::Graph& graph, const LensModel& model, ad::Var state,
                                const data::Session& target);

struct DecodeTrace {
  /// Per step: renormalized distribution over unmasked entries (masked = 0).
  std::vector<std::vector<Real>> step_probabilities;
};

/// Greedy autoregressive decode; PAD, UNK and already-emitted items are masked.
/// Stops at EOB or after k_max items.
std::vector<data::ItemIndex> nsd_decode_greedy(const LensModel& model, const Tensor& state,
                                               std::size_t k_max, DecodeTrace* trace = nullptr);

enum class TteLoss : std::uint8_t { kMae, kMse };

/// dense -> ReLU -> dense -> softplus; non-negative days until the next session.
ad::Var tte_predict(ad::Graph& graph, const LensModel& model, ad::Var state);
ad::Var tte_loss(ad::Graph& graph, ad::Var prediction, double observed_days, TteLoss kind);

std::string_view tte_loss_name(TteLoss kind);
TteLoss parse_tte_loss(std::string_view name);

}  // namespace lens

#endif  // LENS_MODEL_HPP
