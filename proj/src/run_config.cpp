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

#include "lens/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "lens/error.hpp"

namespace lens {

namespace {

/// Reads scalars from one mapping and rejects keys nobody asked for.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError("\"" + path_ + "\" must be a mapping");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node v = node_[key];
    if (!v || v.IsNull()) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("invalid value for \"" + qualified(key) + "\"");
    }
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& out) {
    T value{};
    seen_.insert(key);
    if (!node_ || node_.IsNull() || !node_[key] || node_[key].IsNull()) return;
    read(key, value);
    out = value;
  }

  void read_path(const std::string& key, std::filesystem::path& out) {
    std::string s = out.string();
    read(key, s);
    out = s;
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return Section(YAML::Node(), qualified(key));
    return Section(node_[key], qualified(key));
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("unknown configuration key \"" + qualified(key) + "\"");
    }
  }

 private:
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override \"" + assignment + "\" is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError("override \"" + assignment + "\": " + e.what());
  }
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  // Walk with fresh handles; YAML::Node assignment would alias instead of descend.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next || next.IsNull()) {
      chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next = chain.back()[parts[i]];
    }
    if (!next.IsMap()) throw ConfigError("override \"" + key + "\": \"" + parts[i] + "\" is not a section");
    chain.push_back(next);
  }
  chain.back()[parts.back()] = value;
}

char parse_delimiter(const std::string& s) {
  if (s == "\\t" || s == "tab") return '\t';
  if (s.size() != 1) throw ConfigError("schema.delimiter must be a single character");
  return s[0];
}

}  // namespace

ModelConfig ModelSection::resolve(std::size_t vocab_size, std::size_t user_count) const {
  ModelConfig c = model_preset(preset, vocab_size, user_count);
  if (sce_layers) c.sce_layers = *sce_layers;
  if (sce_cells) {
    c.sce_cells = *sce_cells;
    if (!item_dim) c.item_dim = *sce_cells;
  }
  if (sce_bidirectional) c.sce_bidirectional = *sce_bidirectional;
  if (fbe_layers) c.fbe_layers = *fbe_layers;
  if (fbe_cells) c.fbe_cells = *fbe_cells;
  if (fbe_bidirectional) c.fbe_bidirectional = *fbe_bidirectional;
  if (nsd_cell_sizes) {
    c.nsd_cell_sizes = *nsd_cell_sizes;
    c.nsd_layers = nsd_cell_sizes->size();
  }
  if (item_dim) c.item_dim = *item_dim;
  if (user_dim) c.user_dim = *user_dim;
  if (tte_hidden) c.tte_hidden = *tte_hidden;
  if (decode_max_items) c.decode_max_items = *decode_max_items;
  c.validate();
  return c;
}

RunConfig parse_run_config(const std::string& yaml, const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("cannot parse configuration: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("configuration root must be a mapping");
  for (const auto& o : overrides) apply_override(root, o);

  RunConfig rc;
  Section top(root, "");
  top.read("seed", rc.seed);
  top.read_path("output_dir", rc.output_dir);
  top.read("run_name", rc.run_name);
  top.read("workers", rc.workers);
  if (rc.workers == 0) throw ConfigError("workers must be >= 1");

  Section data = top.child("data");
  data.read_path("raw", rc.raw_path);
  data.read_path("store", rc.store_path);
  data.read_path("checkpoint", rc.checkpoint_path);
  data.finish();

  Section schema = top.child("schema");
  std::string delimiter(1, rc.schema.delimiter);
  schema.read("delimiter", delimiter);
  rc.schema.delimiter = parse_delimiter(delimiter);
  schema.read("tran_id", rc.schema.tran_id);
  schema.read("client_id", rc.schema.client_id);
  schema.read("prod_id", rc.schema.prod_id);
  schema.read("timestamp", rc.schema.timestamp);
  schema.read("prod_amount", rc.schema.prod_amount);
  schema.read("prod_qty", rc.schema.prod_qty);
  schema.read("timestamp_format", rc.schema.timestamp_format);
  schema.read("max_malformed_fraction", rc.schema.max_malformed_fraction);
  schema.finish();

  Section model = top.child("model");
  ModelSection& m = rc.model;
  model.read("preset", m.preset);
  model.read("sce_layers", m.sce_layers);
  model.read("sce_cells", m.sce_cells);
  model.read("sce_bidirectional", m.sce_bidirectional);
  model.read("fbe_layers", m.fbe_layers);
  model.read("fbe_cells", m.fbe_cells);
  model.read("fbe_bidirectional", m.fbe_bidirectional);
  model.read("nsd_cell_sizes", m.nsd_cell_sizes);
  model.read("item_dim", m.item_dim);
  model.read("user_dim", m.user_dim);
  model.read("tte_hidden", m.tte_hidden);
  model.read("decode_max_items", m.decode_max_items);
  model.finish();

  Section training = top.child("training");
  TrainRunConfig& t = rc.training;
  training.read("epochs", t.epochs);
  training.read("batch_max", t.batch_max);
  training.read("learning_rate", t.learning_rate);
  training.read("clip_norm", t.clip_norm);
  std::string objective(objective_name(t.objective));
  training.read("objective", objective);
  t.objective = parse_objective(objective);
  std::string embeddings(scenario_name(t.embeddings));
  training.read("embeddings", embeddings);
  t.embeddings = parse_scenario(embeddings);
  training.read_path("warm_start", t.warm_start_path);
  training.read("min_sessions", t.min_sessions);
  std::string loss(tte_loss_name(t.tte_loss));
  training.read("tte_loss", loss);
  t.tte_loss = parse_tte_loss(loss);
  training.read("patience", t.patience);
  training.read("min_delta", t.min_delta);
  training.read("checkpoint_every", t.checkpoint_every);
  training.read("holdout_fraction", rc.holdout_fraction);
  training.finish();
  t.seed = rc.seed;
  if (!(rc.holdout_fraction > 0 && rc.holdout_fraction < 1)) {
    throw ConfigError("training.holdout_fraction must be in (0, 1)");
  }

  Section evaluation = top.child("evaluation");
  evaluation.read("k_max", rc.k_max);
  evaluation.finish();
  if (rc.k_max == 0) throw ConfigError("evaluation.k_max must be >= 1");

  Section anomaly = top.child("anomaly");
  anomaly::AnomalyConfig& a = rc.anomaly;
  a.min_sessions = t.min_sessions;
  anomaly.read("min_sessions", a.min_sessions);
  anomaly.read("k_min", a.k_min);
  anomaly.read("k_max", a.k_max);
  anomaly.read("threshold", a.threshold);
  anomaly.read("restarts", a.restarts);
  anomaly.read("max_iterations", a.max_iterations);
  anomaly.finish();
  a.seed = rc.seed;
  a.workers = rc.workers;

  top.finish();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), overrides);
}

std::string run_config_yaml(const RunConfig& rc) {
  YAML::Emitter out;
  // Settings come from decimal text, so 15 digits round-trip them exactly.
  out.SetDoublePrecision(15);
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << rc.seed;
  out << YAML::Key << "output_dir" << YAML::Value << rc.output_dir.string();
  out << YAML::Key << "run_name" << YAML::Value << rc.run_name;
  out << YAML::Key << "workers" << YAML::Value << rc.workers;

  out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "raw" << YAML::Value << rc.raw_path.string();
  out << YAML::Key << "store" << YAML::Value << rc.store_path.string();
  out << YAML::Key << "checkpoint" << YAML::Value << rc.checkpoint_path.string();
  out << YAML::EndMap;

  const auto& s = rc.schema;
  out << YAML::Key << "schema" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "delimiter" << YAML::Value << (s.delimiter == '\t' ? std::string("\\t") : std::string(1, s.delimiter));
  out << YAML::Key << "tran_id" << YAML::Value << s.tran_id;
  out << YAML::Key << "client_id" << YAML::Value << s.client_id;
  out << YAML::Key << "prod_id" << YAML::Value << s.prod_id;
  out << YAML::Key << "timestamp" << YAML::Value << s.timestamp;
  out << YAML::Key << "prod_amount" << YAML::Value << s.prod_amount;
  out << YAML::Key << "prod_qty" << YAML::Value << s.prod_qty;
  out << YAML::Key << "timestamp_format" << YAML::Value << s.timestamp_format;
  out << YAML::Key << "max_malformed_fraction" << YAML::Value << s.max_malformed_fraction;
  out << YAML::EndMap;

  const auto& m = rc.model;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "preset" << YAML::Value << m.preset;
  auto opt = [&out](const char* key, const auto& v) {
    if (v) out << YAML::Key << key << YAML::Value << *v;
  };
  opt("sce_layers", m.sce_layers);
  opt("sce_cells", m.sce_cells);
  opt("sce_bidirectional", m.sce_bidirectional);
  opt("fbe_layers", m.fbe_layers);
  opt("fbe_cells", m.fbe_cells);
  opt("fbe_bidirectional", m.fbe_bidirectional);
  if (m.nsd_cell_sizes) out << YAML::Key << "nsd_cell_sizes" << YAML::Value << YAML::Flow << *m.nsd_cell_sizes;
  opt("item_dim", m.item_dim);
  opt("user_dim", m.user_dim);
  opt("tte_hidden", m.tte_hidden);
  opt("decode_max_items", m.decode_max_items);
  out << YAML::EndMap;

  const auto& t = rc.training;
  out << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "epochs" << YAML::Value << t.epochs;
  out << YAML::Key << "batch_max" << YAML::Value << t.batch_max;
  out << YAML::Key << "learning_rate" << YAML::Value << t.learning_rate;
  out << YAML::Key << "clip_norm" << YAML::Value << t.clip_norm;
  out << YAML::Key << "objective" << YAML::Value << std::string(objective_name(t.objective));
  out << YAML::Key << "embeddings" << YAML::Value << std::string(scenario_name(t.embeddings));
  out << YAML::Key << "warm_start" << YAML::Value << t.warm_start_path.string();
  out << YAML::Key << "min_sessions" << YAML::Value << t.min_sessions;
  out << YAML::Key << "tte_loss" << YAML::Value << std::string(tte_loss_name(t.tte_loss));
  out << YAML::Key << "patience" << YAML::Value << t.patience;
  out << YAML::Key << "min_delta" << YAML::Value << t.min_delta;
  out << YAML::Key << "checkpoint_every" << YAML::Value << t.checkpoint_every;
  out << YAML::Key << "holdout_fraction" << YAML::Value << rc.holdout_fraction;
  out << YAML::EndMap;

  out << YAML::Key << "evaluation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "k_max" << YAML::Value << rc.k_max;
  out << YAML::EndMap;

  const auto& a = rc.anomaly;
  out << YAML::Key << "anomaly" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "min_sessions" << YAML::Value << a.min_sessions;
  out << YAML::Key << "k_min" << YAML::Value << a.k_min;
  out << YAML::Key << "k_max" << YAML::Value << a.k_max;
  out << YAML::Key << "threshold" << YAML::Value << a.threshold;
  out << YAML::Key << "restarts" << YAML::Value << a.restarts;
  out << YAML::Key << "max_iterations" << YAML::Value << a.max_iterations;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace lens
