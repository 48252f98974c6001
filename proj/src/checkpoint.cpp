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

#include "lens/checkpoint.hpp"

#include <fstream>

#include "lens/binary_io.hpp"
#include "lens/error.hpp"

namespace lens {

namespace {

void write_tensor(io::BinaryWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u64(d);
  w.raw(t.data().data(), t.size() * sizeof(Real));
}

Tensor read_tensor(io::BinaryReader& r, std::uint8_t real_bytes, const std::string& what) {
  const std::uint32_t rank = r.u32(what + " rank");
  if (rank > 8) throw CompatibilityError(what + ": implausible rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) d = r.u64(what + " shape");
  Tensor t(shape);
  if (real_bytes == sizeof(Real)) {
    r.raw(t.data().data(), t.size() * sizeof(Real), what + " values");
  } else {
    for (Real& v : t.data()) {
      v = real_bytes == 8 ? static_cast<Real>(r.f64(what + " values"))
                          : static_cast<Real>(r.f32(what + " values"));
    }
  }
  return t;
}

void write_config(io::BinaryWriter& w, const ModelConfig& c) {
  w.u64(c.sce_layers);
  w.u64(c.sce_cells);
  w.u8(c.sce_bidirectional ? 1 : 0);
  w.u64(c.fbe_layers);
  w.u64(c.fbe_cells);
  w.u8(c.fbe_bidirectional ? 1 : 0);
  w.u64(c.nsd_layers);
  for (std::size_t s : c.nsd_cell_sizes) w.u64(s);
  w.u64(c.item_dim);
  w.u64(c.user_dim);
  w.u64(c.vocab_size);
  w.u64(c.user_count);
  w.u64(c.decode_max_items);
  w.u64(c.tte_hidden);
}

ModelConfig read_config(io::BinaryReader& r) {
  ModelConfig c;
  c.sce_layers = r.u64("config sce_layers");
  c.sce_cells = r.u64("config sce_cells");
  c.sce_bidirectional = r.u8("config sce_bidirectional") != 0;
  c.fbe_layers = r.u64("config fbe_layers");
  c.fbe_cells = r.u64("config fbe_cells");
  c.fbe_bidirectional = r.u8("config fbe_bidirectional") != 0;
  c.nsd_layers = r.u64("config nsd_layers");
  if (c.nsd_layers > 64) throw CompatibilityError("checkpoint config: implausible nsd_layers");
  c.nsd_cell_sizes.resize(c.nsd_layers);
  for (auto& s : c.nsd_cell_sizes) s = r.u64("config nsd_cell_sizes");
  c.item_dim = r.u64("config item_dim");
  c.user_dim = r.u64("config user_dim");
  c.vocab_size = r.u64("config vocab_size");
  c.user_count = r.u64("config user_count");
  c.decode_max_items = r.u64("config decode_max_items");
  c.tte_hidden = r.u64("config tte_hidden");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw CompatibilityError(std::string("checkpoint holds an invalid model config: ") + e.what());
  }
  return c;
}

/// Reads the parameter blobs into `params`, whose names and shapes are authoritative.
void read_parameters(io::BinaryReader& r, std::uint8_t real_bytes, ModelParams& params) {
  auto expected = params.all();
  const std::uint32_t count = r.u32("parameter count");
  if (count != expected.size()) {
    throw CompatibilityError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                             std::to_string(expected.size()));
  }
  for (Parameter* p : expected) {
    const std::string what = "tensor \"" + p->name + "\"";
    const std::string name = r.str(what + " name");
    if (name != p->name) {
      throw CompatibilityError("checkpoint tensor order mismatch: found \"" + name + "\" where \"" +
                               p->name + "\" was expected");
    }
    const bool trainable = r.u8(what + " flags") != 0;
    Tensor t = read_tensor(r, real_bytes, what);
    if (t.shape() != p->value.shape()) {
      throw CompatibilityError("shape mismatch for " + what + ": checkpoint " +
                               shape_to_string(t.shape()) + ", model " +
                               shape_to_string(p->value.shape()));
    }
    p->value = std::move(t);
    p->trainable = trainable;
    p->grad = Tensor(p->value.shape());
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const LensModel& model,
                      const std::map<std::string, std::string>& metadata, const RmsProp* optimizer) {
  io::BinaryWriter w(out);
  w.magic("LENSCKPT");
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(sizeof(Real)));
  write_config(w, model.config);
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    w.str(k);
    w.str(v);
  }
  const auto params = model.params.all();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.str(p->name);
    w.u8(p->trainable ? 1 : 0);
    write_tensor(w, p->value);
  }
  w.u8(optimizer ? 1 : 0);
  if (optimizer) {
    w.f64(optimizer->options().learning_rate);
    w.f64(optimizer->options().decay);
    w.f64(optimizer->options().epsilon);
    w.i64(optimizer->steps());
    w.u32(static_cast<std::uint32_t>(optimizer->accumulators().size()));
    for (const auto& [name, acc] : optimizer->accumulators()) {
      w.str(name);
      write_tensor(w, acc);
    }
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  io::BinaryReader r(in);
  r.expect_magic("LENSCKPT", "checkpoint header");
  const std::uint32_t version = r.u32("checkpoint format version");
  if (version != kCheckpointVersion) {
    throw CompatibilityError("checkpoint version " + std::to_string(version) +
                             " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint8_t real_bytes = r.u8("checkpoint precision");
  if (real_bytes != 4 && real_bytes != 8) throw CompatibilityError("checkpoint precision byte is corrupt");

  Checkpoint ckpt;
  const ModelConfig config = read_config(r);
  const std::uint32_t meta = r.u32("metadata count");
  for (std::uint32_t i = 0; i < meta; ++i) {
    std::string key = r.str("metadata key");
    ckpt.metadata[key] = r.str("metadata value for " + key);
  }
  ckpt.model = LensModel::create(config, 0);
  read_parameters(r, real_bytes, ckpt.model.params);
  if (r.u8("optimizer flag") != 0) {
    OptimizerSnapshot snap;
    snap.options.learning_rate = static_cast<Real>(r.f64("optimizer learning rate"));
    snap.options.decay = static_cast<Real>(r.f64("optimizer decay"));
    snap.options.epsilon = static_cast<Real>(r.f64("optimizer epsilon"));
    snap.steps = r.i64("optimizer steps");
    const std::uint32_t n = r.u32("optimizer accumulator count");
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string name = r.str("optimizer accumulator name");
      snap.accumulators[name] = read_tensor(r, real_bytes, "optimizer accumulator \"" + name + "\"");
    }
    ckpt.optimizer = std::move(snap);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const LensModel& model,
                     const std::map<std::string, std::string>& metadata, const RmsProp* optimizer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, model, metadata, optimizer);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CompatibilityError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

std::map<std::string, std::string> load_checkpoint_into(const std::filesystem::path& path,
                                                        LensModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CompatibilityError("cannot open checkpoint " + path.string());
  io::BinaryReader r(in);
  r.expect_magic("LENSCKPT", "checkpoint header");
  const std::uint32_t version = r.u32("checkpoint format version");
  if (version != kCheckpointVersion) {
    throw CompatibilityError("checkpoint version " + std::to_string(version) + " is not supported");
  }
  const std::uint8_t real_bytes = r.u8("checkpoint precision");
  if (real_bytes != 4 && real_bytes != 8) throw CompatibilityError("checkpoint precision byte is corrupt");
  const ModelConfig stored = read_config(r);
  std::map<std::string, std::string> metadata;
  const std::uint32_t meta = r.u32("metadata count");
  for (std::uint32_t i = 0; i < meta; ++i) {
    std::string key = r.str("metadata key");
    metadata[key] = r.str("metadata value for " + key);
  }
  ModelParams incoming = init_params(model.config, 0);
  read_parameters(r, real_bytes, incoming);
  if (!(stored == model.config)) {
    throw CompatibilityError("checkpoint model config differs from the requested model");
  }
  model.params = std::move(incoming);
  return metadata;
}

}  // namespace lens
