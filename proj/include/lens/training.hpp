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

#ifndef LENS_TRAINING_HPP
#define LENS_TRAINING_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lens/data.hpp"
#include "lens/model.hpp"
#include "lens/optimizer.hpp"

namespace lens {

enum class Objective : std::uint8_t { kNextBasket, kTimeToEvent };
enum class EmbeddingScenario : std::uint8_t { kCold, kWarm, kWarmFrozen };

std::string_view objective_name(Objective o);
Objective parse_objective(std::string_view name);
std::string_view scenario_name(EmbeddingScenario s);
EmbeddingScenario parse_scenario(std::string_view name);

struct TrainRunConfig {
  std::size_t epochs = 30;
  std::size_t batch_max = 128;
  double learning_rate = 0.001;
  double clip_norm = 5.0;
  std::uint64_t seed = 42;
  Objective objective = Objective::kNextBasket;
  EmbeddingScenario embeddings = EmbeddingScenario::kCold;
  std::filesystem::path warm_start_path;
  std::size_t min_sessions = 3;
  TteLoss tte_loss = TteLoss::kMae;
  std::size_t patience = 3;    // 0 disables early stopping
  double min_delta = 1e-4;
  std::size_t checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint
  std::filesystem::path output_dir;  // empty: no checkpoints written

  void validate() const;
};

/// Seed-deterministic shuffle of `slices` for `epoch`, cut into batches of at most batch_max.
std::vector<std::vector<data::TrainingSlice>> batch_slices(std::span<const data::TrainingSlice> slices,
                                                           std::size_t batch_max, std::uint64_t seed,
                                                           std::size_t epoch);

/// Loss of one example: teacher-forced NLL of the next basket or the
/// time-to-event loss, given the first `prefix_length` sessions.
ad::Var example_loss(ad::Graph& graph, const LensModel& model, const data::Funnel& funnel,
                     std::size_t prefix_length, const data::Session& target, double target_dt_days,
                     Objective objective, TteLoss tte_loss);

/// Mean per-slice loss; when `accumulate_gradients` is set each slice's
/// gradient, scaled by 1/|batch|, is added into the parameters.
double compute_batch_loss(std::span<const data::TrainingSlice> batch, std::span<const data::Funnel> funnels,
                          const LensModel& model, Objective objective, TteLoss tte_loss = TteLoss::kMae,
                          bool accumulate_gradients = false);

/// Mean loss over validation pairs, without gradients.
double validation_loss(std::span<const data::ValidationPair> pairs, std::span<const data::Funnel> funnels,
                       const LensModel& model, Objective objective, TteLoss tte_loss = TteLoss::kMae);

/// Replaces the item table per the embedding scenario (cold keeps the current table).
void apply_embedding_scenario(LensModel& model, EmbeddingScenario scenario,
                              const std::filesystem::path& warm_path, const data::ItemVocab& vocab,
                              std::uint64_t seed, WarmStartReport* report = nullptr);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  std::optional<double> validation_loss;
  double seconds = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::vector<double> batch_losses;
  double wall_seconds = 0;
  std::size_t train_slices = 0;
  std::size_t validation_pairs = 0;
  std::size_t excluded_funnels = 0;
  std::size_t optimizer_steps = 0;
  bool early_stopped = false;
  std::filesystem::path checkpoint_path;
  TrainRunConfig config;
  ModelConfig model;
};

/**
 * Runs the optimization loop: per batch forward, backward, global-norm clip
 * and one RMSprop step; per epoch the mean loss (and validation loss when
 * validation pairs exist). Throws TrainingError on a non-finite loss.
 */
class Trainer {
 public:
  Trainer(LensModel& model, TrainRunConfig config);

  TrainReport run(const data::DataSplit& split,
                  const std::map<std::string, std::string>& checkpoint_metadata = {},
                  const std::function<void(const EpochStats&)>& on_epoch = {});

  const RmsProp& optimizer() const noexcept { return optimizer_; }

 private:
  void save(const std::filesystem::path& path, const std::map<std::string, std::string>& metadata) const;

  LensModel& model_;
  TrainRunConfig config_;
  RmsProp optimizer_;
};

TrainReport train(LensModel& model, const data::DataSplit& split, const TrainRunConfig& config);

/// One "key=value" line per metric.
void write_report_text(std::ostream& out, const TrainReport& report);
std::string report_json(const TrainReport& report);

/// Throws TrainingError if any training slice touches a held-out session.
void check_no_leakage(std::span<const data::Funnel> train, std::span<const data::TrainingSlice> slices,
                      std::span<const data::ValidationPair> validation);

}  // namespace lens

#endif  // LENS_TRAINING_HPP
