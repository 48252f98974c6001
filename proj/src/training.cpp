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

#include "lens/training.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "lens/checkpoint.hpp"
#include "lens/error.hpp"
#include "lens/random.hpp"

namespace lens {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json config_json(const TrainRunConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_max", c.batch_max},
          {"learning_rate", c.learning_rate},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed},
          {"objective", objective_name(c.objective)},
          {"embeddings", scenario_name(c.embeddings)},
          {"min_sessions", c.min_sessions},
          {"tte_loss", tte_loss_name(c.tte_loss)},
          {"patience", c.patience},
          {"min_delta", c.min_delta},
          {"checkpoint_every", c.checkpoint_every}};
}

nlohmann::json model_json(const ModelConfig& m) {
  return {{"sce_layers", m.sce_layers},       {"sce_cells", m.sce_cells},
          {"sce_bidirectional", m.sce_bidirectional},
          {"fbe_layers", m.fbe_layers},       {"fbe_cells", m.fbe_cells},
          {"fbe_bidirectional", m.fbe_bidirectional},
          {"nsd_layers", m.nsd_layers},       {"nsd_cell_sizes", m.nsd_cell_sizes},
          {"item_dim", m.item_dim},           {"user_dim", m.user_dim},
          {"vocab_size", m.vocab_size},       {"user_count", m.user_count},
          {"decode_max_items", m.decode_max_items}, {"tte_hidden", m.tte_hidden},
          {"parameter_count", parameter_count(m)}};
}

std::string session_key(const data::Funnel& f, const data::Session& s) {
  return f.client_id + '\x1f' + s.tran_id;
}

}  // namespace

std::string_view objective_name(Objective o) {
  return o == Objective::kNextBasket ? "next-basket" : "time-to-event";
}

Objective parse_objective(std::string_view name) {
  if (name == "next-basket") return Objective::kNextBasket;
  if (name == "time-to-event") return Objective::kTimeToEvent;
  throw ConfigError("unknown objective \"" + std::string(name) + "\" (valid: next-basket, time-to-event)");
}

std::string_view scenario_name(EmbeddingScenario s) {
  switch (s) {
    case EmbeddingScenario::kCold: return "cold";
    case EmbeddingScenario::kWarm: return "warm";
    case EmbeddingScenario::kWarmFrozen: return "warm-frozen";
  }
  return "cold";
}

EmbeddingScenario parse_scenario(std::string_view name) {
  if (name == "cold") return EmbeddingScenario::kCold;
  if (name == "warm") return EmbeddingScenario::kWarm;
  if (name == "warm-frozen") return EmbeddingScenario::kWarmFrozen;
  throw ConfigError("unknown embedding scenario \"" + std::string(name) +
                    "\" (valid: cold, warm, warm-frozen)");
}

void TrainRunConfig::validate() const {
  if (batch_max == 0) throw ConfigError("batch_max must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  if (min_sessions < 2) throw ConfigError("min_sessions must be >= 2");
  if (embeddings != EmbeddingScenario::kCold && warm_start_path.empty()) {
    throw ConfigError("warm embedding scenarios need a warm-start file");
  }
}

std::vector<std::vector<data::TrainingSlice>> batch_slices(std::span<const data::TrainingSlice> slices,
                                                           std::size_t batch_max, std::uint64_t seed,
                                                           std::size_t epoch) {
  if (batch_max == 0) throw ConfigError("batch_max must be >= 1");
  std::vector<data::TrainingSlice> order(slices.begin(), slices.end());
  Rng rng(derive_seed(seed, 0xba7c4000ULL + epoch));
  rng.shuffle(std::span<data::TrainingSlice>(order));
  std::vector<std::vector<data::TrainingSlice>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_max) {
    const std::size_t end = std::min(order.size(), start + batch_max);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

ad::Var example_loss(ad::Graph& graph, const LensModel& model, const data::Funnel& funnel,
                     std::size_t prefix_length, const data::Session& target, double target_dt_days,
                     Objective objective, TteLoss tte_loss) {
  const ad::Var state = encode_funnel(graph, model, funnel, prefix_length);
  if (objective == Objective::kNextBasket) return nsd_teacher_forced_loss(graph, model, state, target);
  return lens::tte_loss(graph, tte_predict(graph, model, state), target_dt_days, tte_loss);
}

double compute_batch_loss(std::span<const data::TrainingSlice> batch, std::span<const data::Funnel> funnels,
                          const LensModel& model, Objective objective, TteLoss tte_loss,
                          bool accumulate_gradients) {
  if (batch.empty()) throw Error("compute_batch_loss: empty batch");
  const Real weight = Real{1} / static_cast<Real>(batch.size());
  double total = 0;
  for (const auto& slice : batch) {
    const data::Funnel& f = funnels[slice.funnel_index];
    const std::size_t t = slice.prefix_length;
    ad::Graph graph(accumulate_gradients);
    ad::Var loss = example_loss(graph, model, f, t, f.sessions.at(t), f.features.at(t)[0], objective, tte_loss);
    total += static_cast<double>(loss.item());
    if (accumulate_gradients) graph.backward(ad::scale(loss, weight));
  }
  return total / static_cast<double>(batch.size());
}

double validation_loss(std::span<const data::ValidationPair> pairs, std::span<const data::Funnel> funnels,
                       const LensModel& model, Objective objective, TteLoss tte_loss) {
  if (pairs.empty()) return 0;
  double total = 0;
  for (const auto& pair : pairs) {
    const data::Funnel& f = funnels[pair.funnel_index];
    ad::Graph graph(false);
    total += static_cast<double>(
        example_loss(graph, model, f, f.length(), pair.target, pair.target_dt_days, objective, tte_loss).item());
  }
  return total / static_cast<double>(pairs.size());
}

void apply_embedding_scenario(LensModel& model, EmbeddingScenario scenario,
                              const std::filesystem::path& warm_path, const data::ItemVocab& vocab,
                              std::uint64_t seed, WarmStartReport* report) {
  if (scenario == EmbeddingScenario::kCold) return;
  if (vocab.size() != model.config.vocab_size) {
    throw CompatibilityError("vocabulary has " + std::to_string(vocab.size()) +
                             " entries, model expects " + std::to_string(model.config.vocab_size));
  }
  model.params.items = load_warm(warm_path, vocab, model.config.item_dim,
                                 scenario == EmbeddingScenario::kWarm, derive_seed(seed, 1), report);
}

void check_no_leakage(std::span<const data::Funnel> train, std::span<const data::TrainingSlice> slices,
                      std::span<const data::ValidationPair> validation) {
  std::set<std::string> held_out;
  for (const auto& pair : validation) held_out.insert(session_key(train[pair.funnel_index], pair.target));
  if (held_out.empty()) return;
  for (const auto& slice : slices) {
    const data::Funnel& f = train[slice.funnel_index];
    for (std::size_t t = 0; t <= slice.prefix_length; ++t) {
      if (held_out.count(session_key(f, f.sessions[t]))) {
        throw TrainingError("validation session " + f.sessions[t].tran_id + " of client " + f.client_id +
                            " reached a training slice");
      }
    }
  }
}

Trainer::Trainer(LensModel& model, TrainRunConfig config)
    : model_(model),
      config_(std::move(config)),
      optimizer_(RmsPropOptions{static_cast<Real>(config_.learning_rate), Real(0.9), Real(1e-8)}) {
  config_.validate();
}

void Trainer::save(const std::filesystem::path& path, const std::map<std::string, std::string>& metadata) const {
  save_checkpoint(path, model_, metadata, &optimizer_);
}

TrainReport Trainer::run(const data::DataSplit& split, const std::map<std::string, std::string>& metadata,
                         const std::function<void(const EpochStats&)>& on_epoch) {
  const auto start = Clock::now();
  TrainReport report;
  report.config = config_;
  report.model = model_.config;
  const std::span<const data::Funnel> funnels(split.train);
  const auto slices = data::collect_training_slices(funnels, config_.min_sessions, &report.excluded_funnels);
  if (slices.empty()) throw DataError("no training slices: every funnel is below min_sessions");
  check_no_leakage(funnels, slices, split.validation);
  report.train_slices = slices.size();
  report.validation_pairs = split.validation.size();

  const auto params = model_.params.all();
  double best_validation = std::numeric_limits<double>::infinity();
  std::size_t stagnant = 0;
  std::filesystem::path ckpt_path;
  if (!config_.output_dir.empty()) ckpt_path = config_.output_dir / "model.ckpt";

  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    const auto batches = batch_slices(slices, config_.batch_max, config_.seed, epoch);
    double epoch_total = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      model_.params.zero_grad();
      const double loss = compute_batch_loss(batches[b], funnels, model_, config_.objective,
                                             config_.tte_loss, true);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(b + 1));
      }
      clip_global_norm(params, static_cast<Real>(config_.clip_norm));
      optimizer_.step(params);
      ++report.optimizer_steps;
      report.batch_losses.push_back(loss);
      epoch_total += loss * static_cast<double>(batches[b].size());
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = epoch_total / static_cast<double>(slices.size());
    if (!split.validation.empty()) {
      stats.validation_loss = validation_loss(split.validation, funnels, model_, config_.objective, config_.tte_loss);
    }
    stats.seconds = seconds_since(epoch_start);
    report.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (!ckpt_path.empty() && config_.checkpoint_every > 0 && (epoch + 1) % config_.checkpoint_every == 0) {
      save(config_.output_dir / ("model-epoch" + std::to_string(epoch + 1) + ".ckpt"), metadata);
    }
    if (config_.patience > 0 && stats.validation_loss) {
      if (*stats.validation_loss < best_validation - config_.min_delta) {
        best_validation = *stats.validation_loss;
        stagnant = 0;
      } else if (++stagnant >= config_.patience) {
        report.early_stopped = true;
        break;
      }
    }
  }
  if (!ckpt_path.empty()) {
    save(ckpt_path, metadata);
    report.checkpoint_path = ckpt_path;
  }
  report.wall_seconds = seconds_since(start);
  return report;
}

TrainReport train(LensModel& model, const data::DataSplit& split, const TrainRunConfig& config) {
  Trainer trainer(model, config);
  return trainer.run(split);
}

void write_report_text(std::ostream& out, const TrainReport& r) {
  out << "train_slices=" << r.train_slices << '\n'
      << "validation_pairs=" << r.validation_pairs << '\n'
      << "excluded_funnels=" << r.excluded_funnels << '\n'
      << "optimizer_steps=" << r.optimizer_steps << '\n'
      << "epochs_run=" << r.epochs.size() << '\n'
      << "early_stopped=" << (r.early_stopped ? "true" : "false") << '\n'
      << "wall_seconds=" << r.wall_seconds << '\n';
  for (const auto& e : r.epochs) {
    out << "epoch." << e.epoch << ".train_loss=" << e.train_loss << '\n';
    if (e.validation_loss) out << "epoch." << e.epoch << ".validation_loss=" << *e.validation_loss << '\n';
  }
  if (!r.checkpoint_path.empty()) out << "checkpoint=" << r.checkpoint_path.string() << '\n';
  const nlohmann::json training = config_json(r.config);
  const nlohmann::json model = model_json(r.model);
  for (const auto& [k, v] : training.items()) out << "config.training." << k << '=' << v << '\n';
  for (const auto& [k, v] : model.items()) out << "config.model." << k << '=' << v << '\n';
}

std::string report_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    nlohmann::json j = {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"seconds", e.seconds}};
    if (e.validation_loss) j["validation_loss"] = *e.validation_loss;
    epochs.push_back(j);
  }
  nlohmann::json doc = {{"train_slices", r.train_slices},
                        {"validation_pairs", r.validation_pairs},
                        {"excluded_funnels", r.excluded_funnels},
                        {"optimizer_steps", r.optimizer_steps},
                        {"early_stopped", r.early_stopped},
                        {"wall_seconds", r.wall_seconds},
                        {"epochs", epochs},
                        {"checkpoint", r.checkpoint_path.string()},
                        {"training", config_json(r.config)},
                        {"model", model_json(r.model)}};
  return doc.dump(2);
}

}  // namespace lens
