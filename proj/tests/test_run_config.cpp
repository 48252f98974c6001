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

#include <doctest.h>

#include "lens/error.hpp"
#include "lens/run_config.hpp"

using namespace lens;

TEST_CASE("defaults") {
  const RunConfig rc = parse_run_config("");
  CHECK(rc.seed == 42);
  CHECK(rc.training.batch_max == 128);
  CHECK(rc.training.learning_rate == 0.001);
  CHECK(rc.training.clip_norm == 5.0);
  CHECK(rc.holdout_fraction == 0.3);
  CHECK(rc.k_max == 10);
  CHECK(rc.anomaly.threshold == 3.0);
  CHECK(rc.model.preset == "lens1000");
  CHECK(rc.schema.prod_qty == "PRODT_QTY");
}

TEST_CASE("sections and overrides") {
  const std::string yaml = R"(
seed: 7
workers: 2
schema:
  tran_id: ""
  timestamp_format: "%m/%d/%Y"
model:
  preset: toy
  nsd_cell_sizes: [32, 16]
training:
  epochs: 5
  objective: time-to-event
anomaly:
  threshold: 2.5
)";
  const RunConfig rc = parse_run_config(yaml, {"training.epochs=9", "model.preset=lens2000"});
  CHECK(rc.seed == 7);
  CHECK(rc.training.seed == 7);
  CHECK(rc.anomaly.seed == 7);
  CHECK(rc.anomaly.workers == 2);
  CHECK(rc.schema.tran_id.empty());
  CHECK(rc.training.epochs == 9);
  CHECK(rc.training.objective == Objective::kTimeToEvent);
  CHECK(rc.anomaly.threshold == 2.5);
  CHECK(rc.anomaly.min_sessions == rc.training.min_sessions);
  const ModelConfig mc = rc.model.resolve(50, 4);
  CHECK(mc.sce_cells == 256);
  CHECK(mc.nsd_cell_sizes == std::vector<std::size_t>{32, 16});
  CHECK(mc.nsd_layers == 2);
  CHECK(mc.vocab_size == 50);
}

TEST_CASE("invalid input is a config error") {
  CHECK_THROWS_AS(parse_run_config("trainig:\n  epochs: 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("training:\n  epoch: 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("training:\n  epochs: many\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("training:\n  objective: churn\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("model:\n  preset: lens9000\n").model.resolve(10, 1), ConfigError);
  CHECK_THROWS_AS(parse_run_config("", {"no-equals-sign"}), ConfigError);
  CHECK_THROWS_AS(parse_run_config("", {"training.bogus=1"}), ConfigError);
  CHECK_THROWS_AS(parse_run_config("seed: [1, 2"), ConfigError);
  try {
    parse_run_config("training:\n  learnin_rate: 0.1\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("learnin_rate") != std::string::npos);
  }
}

TEST_CASE("echo parses back to the same settings") {
  const RunConfig rc = parse_run_config("seed: 3\nmodel:\n  preset: toy\n  tte_hidden: 12\ntraining:\n  epochs: 4\n",
                                        {"anomaly.k_max=5", "schema.delimiter=;"});
  const std::string echo = run_config_yaml(rc);
  const RunConfig back = parse_run_config(echo);
  CHECK(run_config_yaml(back) == echo);
  CHECK(back.anomaly.k_max == 5);
  CHECK(back.schema.delimiter == ';');
  CHECK(back.model.tte_hidden == std::optional<std::size_t>(12));
}
