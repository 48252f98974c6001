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

#include "lens/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lens/error.hpp"
#include "lens/random.hpp"

namespace lens {

namespace {

constexpr double kInitRange = 0.05;

Parameter uniform_param(std::string name, Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  fill_uniform(t, rng, -kInitRange, kInitRange);
  return Parameter(std::move(name), std::move(t));
}

Parameter zero_param(std::string name, Shape shape) { return Parameter(std::move(name), Tensor(std::move(shape))); }

LstmWeights make_lstm(const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng) {
  LstmWeights w{uniform_param(prefix + ".weight", {input + hidden, 4 * hidden}, rng),
                zero_param(prefix + ".bias", {1, 4 * hidden})};
  auto b = w.bias.value.data();
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden),
            b.begin() + static_cast<std::ptrdiff_t>(2 * hidden), Real{1});
  return w;
}

DenseWeights make_dense(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  return DenseWeights{uniform_param(prefix + ".weight", {in, out}, rng),
                      zero_param(prefix + ".bias", {1, out})};
}

std::vector<RecurrentLayer> make_stack(const std::string& prefix, std::size_t layers,
                                       std::size_t input, std::size_t hidden, bool bidirectional,
                                       Rng& rng) {
  std::vector<RecurrentLayer> stack;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input : hidden * (bidirectional ? 2 : 1);
    RecurrentLayer layer;
    const std::string base = prefix + ".l" + std::to_string(l);
    layer.directions.push_back(make_lstm(base + ".fwd", in, hidden, rng));
    if (bidirectional) layer.directions.push_back(make_lstm(base + ".bwd", in, hidden, rng));
    stack.push_back(std::move(layer));
  }
  return stack;
}

std::size_t lstm_count(std::size_t input, std::size_t hidden) {
  return (input + hidden) * 4 * hidden + 4 * hidden;
}

std::size_t stack_count(std::size_t layers, std::size_t input, std::size_t hidden, bool bidirectional) {
  const std::size_t dirs = bidirectional ? 2 : 1;
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    total += dirs * lstm_count(l == 0 ? input : hidden * dirs, hidden);
  }
  return total;
}

ad::Var zeros(ad::Graph& graph, std::size_t width) { return graph.constant(Tensor({1, width})); }

ad::Var dense(ad::Graph& graph, ad::Var x, const DenseWeights& w) {
  return ad::add(ad::matmul(x, graph.parameter(w.weight)), graph.parameter(w.bias));
}

/// Runs a (bi)directional stack; returns the final top-layer hidden state(s).
ad::Var run_stack(ad::Graph& graph, const std::vector<RecurrentLayer>& stack,
                  std::vector<ad::Var> inputs) {
  const std::size_t steps = inputs.size();
  std::vector<ad::Var> fwd(steps), bwd(steps);
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const auto& dirs = stack[l].directions;
    const std::size_t hidden = dirs[0].hidden();
    LstmState s{zeros(graph, hidden), zeros(graph, hidden)};
    for (std::size_t t = 0; t < steps; ++t) {
      s = lstm_cell(graph, inputs[t], s, dirs[0]);
      fwd[t] = s.h;
    }
    if (dirs.size() == 2) {
      LstmState r{zeros(graph, hidden), zeros(graph, hidden)};
      for (std::size_t t = steps; t-- > 0;) {
        r = lstm_cell(graph, inputs[t], r, dirs[1]);
        bwd[t] = r.h;
      }
    }
    if (l + 1 < stack.size()) {
      for (std::size_t t = 0; t < steps; ++t) {
        inputs[t] = dirs.size() == 2 ? ad::concat({fwd[t], bwd[t]}) : fwd[t];
      }
    }
  }
  if (stack.back().directions.size() == 2) return ad::concat({fwd.back(), bwd.front()});
  return fwd.back();
}

ad::Var features_row(ad::Graph& graph, const data::SessionFeatures& f) {
  Tensor t({1, data::kFeatureDim});
  for (std::size_t i = 0; i < data::kFeatureDim; ++i) t[i] = static_cast<Real>(f[i]);
  return graph.constant(std::move(t));
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model config: ") + name + " must be >= 1");
  };
  positive(sce_layers, "sce_layers");
  positive(sce_cells, "sce_cells");
  positive(fbe_layers, "fbe_layers");
  positive(fbe_cells, "fbe_cells");
  positive(nsd_layers, "nsd_layers");
  positive(item_dim, "item_dim");
  positive(user_dim, "user_dim");
  positive(user_count, "user_count");
  positive(decode_max_items, "decode_max_items");
  positive(tte_hidden, "tte_hidden");
  if (vocab_size <= data::kFirstItem) throw ConfigError("model config: vocab_size must exceed the 3 reserved entries");
  if (nsd_cell_sizes.size() != nsd_layers) {
    throw ConfigError("model config: nsd_cell_sizes has " + std::to_string(nsd_cell_sizes.size()) +
                      " entries for " + std::to_string(nsd_layers) + " NSD layers");
  }
  for (std::size_t c : nsd_cell_sizes) positive(c, "nsd_cell_sizes");
}

ModelConfig model_preset(std::string_view name, std::size_t vocab_size, std::size_t user_count) {
  ModelConfig c;
  if (name == "lens1000") {
    c.sce_cells = 64;
    c.fbe_layers = 1;
    c.fbe_cells = 256;
    c.nsd_layers = 1;
    c.nsd_cell_sizes = {512};
  } else if (name == "lens2000") {
    c.sce_cells = 256;
    c.fbe_layers = 2;
    c.fbe_cells = 256;
    c.nsd_layers = 2;
    c.nsd_cell_sizes = {512, 128};
  } else if (name == "toy") {
    c.sce_cells = 16;
    c.fbe_cells = 32;
    c.nsd_cell_sizes = {64};
    c.user_dim = 8;
    c.tte_hidden = 16;
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown model preset \"" + std::string(name) + "\" (valid: " + valid + ")");
  }
  c.sce_layers = 1;
  c.sce_bidirectional = true;
  c.fbe_bidirectional = true;
  c.item_dim = c.sce_cells;
  c.vocab_size = vocab_size;
  c.user_count = user_count;
  return c;
}

std::vector<std::string> preset_names() { return {"lens1000", "lens2000", "toy"}; }

std::vector<Parameter*> ModelParams::all() {
  std::vector<Parameter*> out;
  out.push_back(&items.matrix);
  out.push_back(&users.matrix);
  for (auto* stack : {&sce, &fbe}) {
    for (auto& layer : *stack) {
      for (auto& d : layer.directions) {
        out.push_back(&d.weight);
        out.push_back(&d.bias);
      }
    }
  }
  for (auto& l : nsd) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (auto& d : nsd_init) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  }
  for (auto* d : {&nsd_out, &tte_hidden, &tte_out}) {
    out.push_back(&d->weight);
    out.push_back(&d->bias);
  }
  return out;
}

std::vector<const Parameter*> ModelParams::all() const {
  auto mut = const_cast<ModelParams*>(this)->all();
  return {mut.begin(), mut.end()};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const Parameter* p : all()) total += p->value.size();
  return total;
}

void ModelParams::zero_grad() const {
  for (const Parameter* p : all()) p->zero_grad();
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.items = init_cold(EmbeddingKind::kItem, config.vocab_size, config.item_dim, derive_seed(seed, 1));
  p.users = init_cold(EmbeddingKind::kUser, config.user_count, config.user_dim, derive_seed(seed, 2));
  Rng rng(derive_seed(seed, 3));
  p.sce = make_stack("sce", config.sce_layers, config.item_dim, config.sce_cells,
                     config.sce_bidirectional, rng);
  p.fbe = make_stack("fbe", config.fbe_layers, config.fbe_input_dim(), config.fbe_cells,
                     config.fbe_bidirectional, rng);
  for (std::size_t l = 0; l < config.nsd_layers; ++l) {
    const std::size_t in = l == 0 ? config.item_dim : config.nsd_cell_sizes[l - 1];
    p.nsd.push_back(make_lstm("nsd.l" + std::to_string(l), in, config.nsd_cell_sizes[l], rng));
  }
  for (std::size_t l = 0; l < config.nsd_layers; ++l) {
    p.nsd_init.push_back(make_dense("nsd.init.l" + std::to_string(l), config.state_dim(),
                                    config.nsd_cell_sizes[l], rng));
  }
  p.nsd_out = make_dense("nsd.out", config.nsd_cell_sizes.back(), config.vocab_size, rng);
  p.tte_hidden = make_dense("tte.hidden", config.state_dim(), config.tte_hidden, rng);
  p.tte_out = make_dense("tte.out", config.tte_hidden, 1, rng);
  return p;
}

std::size_t parameter_count(const ModelConfig& c) {
  c.validate();
  std::size_t total = c.vocab_size * c.item_dim + c.user_count * c.user_dim;
  total += stack_count(c.sce_layers, c.item_dim, c.sce_cells, c.sce_bidirectional);
  total += stack_count(c.fbe_layers, c.fbe_input_dim(), c.fbe_cells, c.fbe_bidirectional);
  for (std::size_t l = 0; l < c.nsd_layers; ++l) {
    const std::size_t in = l == 0 ? c.item_dim : c.nsd_cell_sizes[l - 1];
    total += lstm_count(in, c.nsd_cell_sizes[l]);
    total += (c.state_dim() + 1) * c.nsd_cell_sizes[l];
  }
  total += (c.nsd_cell_sizes.back() + 1) * c.vocab_size;
  total += (c.state_dim() + 1) * c.tte_hidden + (c.tte_hidden + 1);
  return total;
}

LensModel LensModel::create(const ModelConfig& config, std::uint64_t seed) {
  return LensModel{config, init_params(config, seed)};
}

LstmState lstm_cell(ad::Graph& graph, ad::Var x, const LstmState& state, const LstmWeights& weights) {
  const std::size_t h = weights.hidden();
  const ad::Var z = ad::add(ad::matmul(ad::concat({x, state.h}), graph.parameter(weights.weight)),
                            graph.parameter(weights.bias));
  const ad::Var input_gate = ad::sigmoid(ad::slice(z, 0, h));
  const ad::Var forget_gate = ad::sigmoid(ad::slice(z, h, h));
  const ad::Var candidate = ad::tanh(ad::slice(z, 2 * h, h));
  const ad::Var output_gate = ad::sigmoid(ad::slice(z, 3 * h, h));
  const ad::Var c = ad::add(ad::mul(forget_gate, state.c), ad::mul(input_gate, candidate));
  return LstmState{ad::mul(output_gate, ad::tanh(c)), c};
}

ad::Var sce_encode(ad::Graph& graph, const LensModel& model, const data::Session& session) {
  if (session.items.empty()) throw DataError("cannot encode an empty basket");
  std::vector<ad::Var> inputs;
  inputs.reserve(session.items.size());
  for (data::ItemIndex item : session.items) inputs.push_back(lookup(graph, model.params.items, item));
  return run_stack(graph, model.params.sce, std::move(inputs));
}

ad::Var fbe_encode(ad::Graph& graph, const LensModel& model, std::span<const ad::Var> session_vectors,
                   std::span<const data::SessionFeatures> features, ad::Var user_embedding) {
  if (session_vectors.empty()) throw DataError("funnel encoder needs at least one session");
  if (session_vectors.size() != features.size()) {
    throw ShapeError("funnel encoder: " + std::to_string(session_vectors.size()) +
                     " sessions but " + std::to_string(features.size()) + " feature rows");
  }
  std::vector<ad::Var> inputs;
  inputs.reserve(session_vectors.size());
  for (std::size_t t = 0; t < session_vectors.size(); ++t) {
    inputs.push_back(ad::concat({session_vectors[t], features_row(graph, features[t]), user_embedding}));
  }
  return run_stack(graph, model.params.fbe, std::move(inputs));
}

ad::Var encode_funnel(ad::Graph& graph, const LensModel& model, const data::Funnel& funnel,
                      std::size_t prefix_length) {
  if (prefix_length == 0 || prefix_length > funnel.length()) {
    throw DataError("funnel " + funnel.client_id + ": prefix length " + std::to_string(prefix_length) +
                    " invalid for " + std::to_string(funnel.length()) + " sessions");
  }
  if (funnel.features.size() != funnel.sessions.size()) {
    throw ShapeError("funnel " + funnel.client_id + ": features not aligned with sessions");
  }
  std::vector<ad::Var> vectors;
  vectors.reserve(prefix_length);
  for (std::size_t t = 0; t < prefix_length; ++t) {
    vectors.push_back(sce_encode(graph, model, funnel.sessions[t]));
  }
  const ad::Var user = lookup(graph, model.params.users, funnel.user_index);
  return fbe_encode(graph, model, vectors,
                    std::span<const data::SessionFeatures>(funnel.features.data(), prefix_length), user);
}

Tensor funnel_state(const LensModel& model, const data::Funnel& funnel, std::size_t prefix_length) {
  ad::Graph graph(false);
  return encode_funnel(graph, model, funnel, prefix_length).value();
}

ad::Var nsd_teacher_forced_loss(ad::Graph& graph, const LensModel& model, ad::Var state,
                                const data::Session& target) {
  if (target.items.empty()) throw DataError("decoder target must contain at least one item");
  const ModelParams& p = model.params;
  std::vector<LstmState> layers;
  for (std::size_t l = 0; l < p.nsd.size(); ++l) {
    layers.push_back(LstmState{dense(graph, state, p.nsd_init[l]), zeros(graph, p.nsd[l].hidden())});
  }
  std::vector<data::ItemIndex> sequence(target.items.begin(), target.items.end());
  sequence.push_back(data::kEob);

  std::vector<ad::Var> losses;
  losses.reserve(sequence.size());
  ad::Var input = zeros(graph, model.config.item_dim);
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    ad::Var x = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l] = lstm_cell(graph, x, layers[l], p.nsd[l]);
      x = layers[l].h;
    }
    losses.push_back(ad::softmax_cross_entropy(dense(graph, x, p.nsd_out), sequence[t]));
    if (t + 1 < sequence.size()) input = lookup(graph, p.items, sequence[t]);
  }
  return ad::mean(ad::concat(losses));
}

std::vector<data::ItemIndex> nsd_decode_greedy(const LensModel& model, const Tensor& state_value,
                                               std::size_t k_max, DecodeTrace* trace) {
  const ModelParams& p = model.params;
  ad::Graph graph(false);
  const ad::Var state = graph.constant(state_value);
  std::vector<LstmState> layers;
  for (std::size_t l = 0; l < p.nsd.size(); ++l) {
    layers.push_back(LstmState{dense(graph, state, p.nsd_init[l]), zeros(graph, p.nsd[l].hidden())});
  }
  const std::size_t vocab = model.config.vocab_size;
  std::vector<bool> masked(vocab, false);
  masked[data::kPad] = true;
  masked[data::kUnk] = true;

  std::vector<data::ItemIndex> emitted;
  ad::Var input = zeros(graph, model.config.item_dim);
  while (emitted.size() < k_max) {
    ad::Var x = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l] = lstm_cell(graph, x, layers[l], p.nsd[l]);
      x = layers[l].h;
    }
    const auto logits = dense(graph, x, p.nsd_out).value().data();
    std::size_t best = vocab;
    Real best_logit = -std::numeric_limits<Real>::infinity();
    for (std::size_t v = 0; v < vocab; ++v) {
      if (!masked[v] && (best == vocab || logits[v] > best_logit)) {
        best = v;
        best_logit = logits[v];
      }
    }
    if (best == vocab) break;
    if (trace) {
      std::vector<Real> probs(vocab, Real{0});
      Real total = 0;
      for (std::size_t v = 0; v < vocab; ++v) {
        if (!masked[v]) total += probs[v] = std::exp(logits[v] - best_logit);
      }
      for (Real& q : probs) q /= total;
      trace->step_probabilities.push_back(std::move(probs));
    }
    if (best == data::kEob) break;
    const auto item = static_cast<data::ItemIndex>(best);
    emitted.push_back(item);
    masked[item] = true;
    input = lookup(graph, p.items, item);
  }
  std::sort(emitted.begin(), emitted.end());
  return emitted;
}

ad::Var tte_predict(ad::Graph& graph, const LensModel& model, ad::Var state) {
  const ad::Var hidden = ad::relu(dense(graph, state, model.params.tte_hidden));
  return ad::softplus(dense(graph, hidden, model.params.tte_out));
}

ad::Var tte_loss(ad::Graph& graph, ad::Var prediction, double observed_days, TteLoss kind) {
  const ad::Var target = graph.constant(Tensor::scalar(static_cast<Real>(observed_days)));
  const ad::Var diff = ad::sub(prediction, target);
  return kind == TteLoss::kMae ? ad::mean(ad::abs(diff)) : ad::mean(ad::square(diff));
}

std::string_view tte_loss_name(TteLoss kind) { return kind == TteLoss::kMae ? "mae" : "mse"; }

TteLoss parse_tte_loss(std::string_view name) {
  if (name == "mae") return TteLoss::kMae;
  if (name == "mse") return TteLoss::kMse;
  throw ConfigError("unknown time-to-event loss \"" + std::string(name) + "\" (valid: mae, mse)");
}

}  // namespace lens
