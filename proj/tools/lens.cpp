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

// Command-line entry point: ingest, train, evaluate, predict, anomaly.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lens/anomaly.hpp"
#include "lens/checkpoint.hpp"
#include "lens/data.hpp"
#include "lens/error.hpp"
#include "lens/evaluation.hpp"
#include "lens/run_config.hpp"
#include "lens/training.hpp"

namespace fs = std::filesystem;
using namespace lens;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kData = 3,
  kTraining = 4,
  kCompatibility = 5,
};

struct Options {
  std::string command;
  fs::path config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> run_name;
  std::optional<std::size_t> workers;
  std::optional<std::string> input;
  std::optional<std::string> store;
  std::optional<std::string> checkpoint;
  std::optional<std::string> preset;
  std::optional<std::size_t> epochs;
  std::optional<double> threshold;
  std::string client;
};

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

/// FNV-1a over client ids in store order; user rows are keyed by position.
std::uint64_t client_fingerprint(const data::FunnelStore& store) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : store.funnels) {
    for (unsigned char c : f.client_id) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunConfig resolve_config(const Options& o) {
  std::vector<std::string> overrides = o.overrides;
  // Dedicated flags are sugar for --set and are applied last, so they win.
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (o.output_dir) overrides.push_back("output_dir=" + *o.output_dir);
  if (o.run_name) overrides.push_back("run_name=" + *o.run_name);
  if (o.workers) overrides.push_back("workers=" + std::to_string(*o.workers));
  if (o.input) overrides.push_back("data.raw=" + *o.input);
  if (o.store) overrides.push_back("data.store=" + *o.store);
  if (o.checkpoint) overrides.push_back("data.checkpoint=" + *o.checkpoint);
  if (o.preset) overrides.push_back("model.preset=" + *o.preset);
  if (o.epochs) overrides.push_back("training.epochs=" + std::to_string(*o.epochs));
  if (o.threshold) {
    std::ostringstream s;
    s << std::setprecision(17) << *o.threshold;
    overrides.push_back("anomaly.threshold=" + s.str());
  }
  return o.config_path.empty() ? parse_run_config("", overrides) : load_run_config(o.config_path, overrides);
}

fs::path make_run_dir(const RunConfig& rc, const std::string& command) {
  std::string name = rc.run_name;
  if (name.empty()) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
    name = command + "-" + stamp;
  }
  fs::path dir = rc.output_dir / name;
  for (int i = 1; fs::exists(dir) && rc.run_name.empty(); ++i) {
    dir = rc.output_dir / (name + "-" + std::to_string(i));
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::ofstream(dir / "config.yaml") << run_config_yaml(rc);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

const fs::path& require(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("missing ") + what);
  return p;
}

int cmd_ingest(const RunConfig& rc) {
  const fs::path& raw = require(rc.raw_path, "raw input path (data.raw or --input)");
  std::ifstream in(raw);
  if (!in) throw DataError("cannot read input " + raw.string());
  const data::ParseResult parsed = data::parse_transactions(in, rc.schema);
  data::FunnelStore store;
  store.vocab = data::build_vocab(parsed.records);
  data::AssemblyStats stats;
  store.funnels = data::assemble_funnels(parsed.records, store.vocab, &stats);
  std::size_t sessions = 0;
  for (const auto& f : store.funnels) sessions += f.length();

  const fs::path dir = make_run_dir(rc, "ingest");
  data::save_store(dir / "funnels.lensdata", store);
  const nlohmann::json summary = {{"rows", parsed.rows},
                                  {"records", parsed.records.size()},
                                  {"malformed_rows", parsed.malformed},
                                  {"funnels", store.funnels.size()},
                                  {"sessions", sessions},
                                  {"vocab_items", store.vocab.item_count()},
                                  {"unknown_items", stats.unknown_items},
                                  {"empty_sessions", stats.empty_sessions},
                                  {"store", (dir / "funnels.lensdata").string()}};
  write_text(dir / "ingest_summary.json", summary.dump(2) + "\n");
  for (const auto& issue : parsed.issues) {
    std::cerr << "skipped line " << issue.line << ": " << issue.reason << '\n';
  }
  for (const auto& [k, v] : summary.items()) std::cout << k << '=' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
  return kOk;
}

/// Metadata that ties a checkpoint to its store and validation split.
std::map<std::string, std::string> checkpoint_metadata(const RunConfig& rc, const data::FunnelStore& store) {
  std::ostringstream holdout;
  holdout << std::setprecision(17) << rc.holdout_fraction;
  return {{"split_seed", std::to_string(rc.seed)},
          {"holdout_fraction", holdout.str()},
          {"min_sessions", std::to_string(rc.training.min_sessions)},
          {"objective", std::string(objective_name(rc.training.objective))},
          {"embeddings", std::string(scenario_name(rc.training.embeddings))},
          {"preset", rc.model.preset},
          {"vocab_fingerprint", hex(store.vocab.fingerprint())},
          {"client_fingerprint", hex(client_fingerprint(store))}};
}

int cmd_train(const RunConfig& rc) {
  const data::FunnelStore store = data::load_store(require(rc.store_path, "funnel store (data.store or --store)"));
  LensModel model = LensModel::create(rc.model.resolve(store.vocab.size(), store.funnels.size()), rc.seed);
  WarmStartReport warm;
  apply_embedding_scenario(model, rc.training.embeddings, rc.training.warm_start_path, store.vocab, rc.seed, &warm);
  const data::DataSplit split =
      data::split_train_validation(store.funnels, rc.holdout_fraction, rc.seed, rc.training.min_sessions);

  const fs::path dir = make_run_dir(rc, "train");
  TrainRunConfig tc = rc.training;
  tc.output_dir = dir;
  std::cout << "parameters=" << model.params.parameter_count() << '\n'
            << "train_funnels=" << split.train.size() << '\n'
            << "validation_pairs=" << split.validation.size() << '\n';
  if (rc.training.embeddings != EmbeddingScenario::kCold) {
    std::cout << "warm_loaded=" << warm.loaded << "\nwarm_cold_fallback=" << warm.cold_fallback << '\n';
  }
  Trainer trainer(model, tc);
  const TrainReport report = trainer.run(split, checkpoint_metadata(rc, store), [](const EpochStats& e) {
    std::cout << "epoch=" << e.epoch << " train_loss=" << e.train_loss;
    if (e.validation_loss) std::cout << " validation_loss=" << *e.validation_loss;
    std::cout << " seconds=" << e.seconds << std::endl;
  });
  std::ostringstream text;
  write_report_text(text, report);
  write_text(dir / "train_report.txt", text.str());
  write_text(dir / "train_report.json", report_json(report) + "\n");
  std::cout << "checkpoint=" << report.checkpoint_path.string() << '\n';
  return kOk;
}

struct Loaded {
  data::FunnelStore store;
  Checkpoint checkpoint;
};

Loaded load_compatible(const RunConfig& rc) {
  Loaded l;
  l.store = data::load_store(require(rc.store_path, "funnel store (data.store or --store)"));
  l.checkpoint = load_checkpoint(require(rc.checkpoint_path, "checkpoint (data.checkpoint or --checkpoint)"));
  const auto& meta = l.checkpoint.metadata;
  const ModelConfig& mc = l.checkpoint.model.config;
  if (mc.vocab_size != l.store.vocab.size()) {
    throw CompatibilityError("checkpoint vocabulary has " + std::to_string(mc.vocab_size) + " entries, store has " +
                             std::to_string(l.store.vocab.size()));
  }
  if (mc.user_count != l.store.funnels.size()) {
    throw CompatibilityError("checkpoint has " + std::to_string(mc.user_count) + " users, store has " +
                             std::to_string(l.store.funnels.size()) + " funnels");
  }
  auto check = [&meta](const char* key, const std::string& actual) {
    const auto it = meta.find(key);
    if (it != meta.end() && it->second != actual) {
      throw CompatibilityError(std::string(key) + " differs: checkpoint " + it->second + ", store " + actual);
    }
  };
  check("vocab_fingerprint", hex(l.store.vocab.fingerprint()));
  check("client_fingerprint", hex(client_fingerprint(l.store)));
  return l;
}

data::DataSplit split_from_metadata(const RunConfig& rc, const Loaded& l) {
  const auto& meta = l.checkpoint.metadata;
  auto get = [&meta](const char* key, const std::string& fallback) {
    const auto it = meta.find(key);
    return it == meta.end() ? fallback : it->second;
  };
  try {
    const std::uint64_t seed = std::stoull(get("split_seed", std::to_string(rc.seed)));
    const double holdout = std::stod(get("holdout_fraction", std::to_string(rc.holdout_fraction)));
    const std::size_t min_sessions = std::stoull(get("min_sessions", std::to_string(rc.training.min_sessions)));
    return data::split_train_validation(l.store.funnels, holdout, seed, min_sessions);
  } catch (const std::logic_error&) {
    throw CompatibilityError("checkpoint split metadata is corrupt");
  }
}

int cmd_evaluate(const RunConfig& rc) {
  const Loaded l = load_compatible(rc);
  const data::DataSplit split = split_from_metadata(rc, l);
  const LensModel& model = l.checkpoint.model;

  const eval::ModelPredictor lens_predictor(model, rc.k_max);
  const eval::FrequencyBaseline baseline(split.train, rc.k_max);
  const eval::EvaluationResult m = eval::evaluate(lens_predictor, split.train, split.validation, rc.workers);
  const eval::EvaluationResult b = eval::evaluate(baseline, split.train, split.validation, rc.workers);
  const eval::TteMetrics tte = eval::tte_evaluate(model, split.train, split.validation);
  const double median_gap = eval::median_interval(split.train);
  const eval::TteMetrics tte_base = eval::tte_evaluate(
      [median_gap](const data::Funnel&, std::size_t) { return median_gap; }, split.train, split.validation);

  auto meta = [&](const char* key) {
    const auto it = l.checkpoint.metadata.find(key);
    return it == l.checkpoint.metadata.end() ? std::string("unknown") : it->second;
  };
  const std::string model_name = meta("preset") == "unknown" ? "LENS" : meta("preset");
  const std::vector<eval::TableRow> rows{{"Frequency baseline", b.mean}, {model_name, m.mean}};

  const fs::path dir = make_run_dir(rc, "evaluate");
  std::ostringstream text;
  eval::write_table(text, "funnel store", rows);
  text << '\n'
       << "evaluated=" << m.evaluated << '\n'
       << "skipped=" << m.skipped << '\n'
       << "k_max=" << rc.k_max << '\n'
       << "averaging=per-customer unweighted mean at k_max\n"
       << "min_sessions=" << meta("min_sessions") << " (applied to training and validation)\n"
       << "objective=" << meta("objective") << '\n'
       << "embeddings=" << meta("embeddings") << '\n'
       << "tte_mae_days=" << tte.mae << '\n'
       << "tte_mse_days=" << tte.mse << '\n'
       << "tte_baseline_median_days=" << median_gap << '\n'
       << "tte_baseline_mae_days=" << tte_base.mae << '\n';
  write_text(dir / "evaluation.txt", text.str());
  std::cout << text.str();

  nlohmann::json summary = {
      {"model", {{"recall", m.mean.recall}, {"precision", m.mean.precision}, {"f1", m.mean.f1}}},
      {"baseline", {{"recall", b.mean.recall}, {"precision", b.mean.precision}, {"f1", b.mean.f1}}},
      {"evaluated", m.evaluated},
      {"skipped", m.skipped},
      {"k_max", rc.k_max},
      {"tte", {{"mae", tte.mae}, {"mse", tte.mse}, {"baseline_mae", tte_base.mae}, {"baseline_mse", tte_base.mse}}},
      {"checkpoint_metadata", l.checkpoint.metadata}};
  write_text(dir / "evaluation.json", summary.dump(2) + "\n");

  std::ofstream pairs(dir / "predictions.tsv");
  pairs << "client_id\tpredicted\tactual\trecall\tprecision\tf1\n";
  auto join = [&](const std::vector<data::ItemIndex>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? " " : "") + l.store.vocab.item(items[i]);
    return s;
  };
  for (const auto& c : m.customers) {
    pairs << c.client_id << '\t' << join(c.predicted) << '\t' << join(c.actual) << '\t' << c.metrics.recall << '\t'
          << c.metrics.precision << '\t' << c.metrics.f1 << '\n';
  }
  return kOk;
}

int cmd_predict(const RunConfig& rc, const std::string& client) {
  if (client.empty()) throw ConfigError("predict needs --client");
  const Loaded l = load_compatible(rc);
  const data::Funnel* funnel = nullptr;
  for (const auto& f : l.store.funnels) {
    if (f.client_id == client) funnel = &f;
  }
  if (!funnel) throw DataError("unknown client \"" + client + "\"");
  const LensModel& model = l.checkpoint.model;
  const auto items = nsd_decode_greedy(model, funnel_state(model, *funnel, funnel->length()), rc.k_max);
  const double days = eval::predict_tte(model, *funnel, funnel->length());

  nlohmann::json out = {{"client_id", client}, {"items", nlohmann::json::array()}, {"days_to_next", days}};
  for (auto i : items) out["items"].push_back(l.store.vocab.item(i));
  const auto it = l.checkpoint.metadata.find("objective");
  if (it != l.checkpoint.metadata.end() && it->second != objective_name(Objective::kTimeToEvent)) {
    std::cerr << "note: checkpoint was trained for " << it->second << "; the time-to-event head is untrained\n";
  }
  const fs::path dir = make_run_dir(rc, "predict");
  write_text(dir / "prediction.json", out.dump(2) + "\n");
  std::cout << "client_id=" << client << "\nitems=";
  for (std::size_t i = 0; i < items.size(); ++i) std::cout << (i ? " " : "") << l.store.vocab.item(items[i]);
  std::cout << "\ndays_to_next=" << days << '\n';
  return kOk;
}

int cmd_anomaly(const RunConfig& rc) {
  const Loaded l = load_compatible(rc);
  const anomaly::AnomalyReport report = anomaly::detect(l.checkpoint.model, l.store.funnels, rc.anomaly);
  const fs::path dir = make_run_dir(rc, "anomaly");
  std::ofstream tsv(dir / "anomaly.tsv");
  anomaly::write_report_tsv(tsv, report);
  write_text(dir / "anomaly.json", anomaly::report_json(report) + "\n");
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "funnels=" << report.funnels.size() << "\nexcluded=" << report.excluded << "\nk=" << report.k
            << "\nflagged=" << report.flagged << '\n';
  for (const auto& f : report.funnels) {
    if (!f.flagged) break;
    std::cout << "flagged " << f.client_id << " d_A=" << f.distance << " score=" << f.score << '\n';
  }
  std::cout << "report=" << (dir / "anomaly.tsv").string() << '\n';
  return kOk;
}

int run(const Options& o) {
  const RunConfig rc = resolve_config(o);
  if (o.command == "ingest") return cmd_ingest(rc);
  if (o.command == "train") return cmd_train(rc);
  if (o.command == "evaluate") return cmd_evaluate(rc);
  if (o.command == "predict") return cmd_predict(rc, o.client);
  if (o.command == "anomaly") return cmd_anomaly(rc);
  throw ConfigError("unknown command " + o.command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical funnel encoder-decoder: ingest, train, evaluate, predict, anomaly"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "YAML run configuration");
    sub->add_option("--set", o.overrides, "Override a configuration key (section.key=value)");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("-o,--output-dir", o.output_dir, "Parent directory for run outputs");
    sub->add_option("--run-name", o.run_name, "Run directory name (default: command and UTC stamp)");
    sub->add_option("-j,--workers", o.workers, "Worker threads for evaluation and anomaly scoring");
  };

  CLI::App* ingest = app.add_subcommand("ingest", "Parse a transaction export into a funnel store");
  common(ingest);
  ingest->add_option("-i,--input", o.input, "Delimited transaction file");

  CLI::App* train = app.add_subcommand("train", "Train a model on a funnel store");
  common(train);
  train->add_option("-s,--store", o.store, "Funnel store");
  train->add_option("-p,--preset", o.preset, "Model preset (lens1000, lens2000, toy)");
  train->add_option("--epochs", o.epochs, "Training epochs");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score the held-out baskets against the baseline");
  common(evaluate);
  evaluate->add_option("-s,--store", o.store, "Funnel store");
  evaluate->add_option("-m,--checkpoint", o.checkpoint, "Model checkpoint");

  CLI::App* predict = app.add_subcommand("predict", "Predict one customer's next basket and days to it");
  common(predict);
  predict->add_option("-s,--store", o.store, "Funnel store");
  predict->add_option("-m,--checkpoint", o.checkpoint, "Model checkpoint");
  predict->add_option("--client", o.client, "Client id")->required();

  CLI::App* anomaly = app.add_subcommand("anomaly", "Score funnels for behavioral anomalies");
  common(anomaly);
  anomaly->add_option("-s,--store", o.store, "Funnel store");
  anomaly->add_option("-m,--checkpoint", o.checkpoint, "Model checkpoint");
  anomaly->add_option("--threshold", o.threshold, "Outlier score threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    return run(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const TrainingError& e) {
    std::cerr << "training failure: " << e.what() << '\n';
    return kTraining;
  } catch (const CompatibilityError& e) {
    std::cerr << "compatibility error: " << e.what() << '\n';
    return kCompatibility;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
