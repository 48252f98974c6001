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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lens/checkpoint.hpp"
#include "lens/error.hpp"
#include "lens/random.hpp"

using namespace lens;

namespace {

std::string to_bytes(const LensModel& m, const std::map<std::string, std::string>& meta = {},
                     const RmsProp* opt = nullptr) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, m, meta, opt);
  return out.str();
}

Checkpoint from_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_checkpoint(in);
}

std::string error_of(const std::string& bytes) {
  try {
    from_bytes(bytes);
  } catch (const CompatibilityError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("lens1000 round trip is bit-exact") {
  LensModel m = LensModel::create(model_preset("lens1000", 60, 9), 13);
  m.params.items.matrix.trainable = false;
  const std::string bytes = to_bytes(m, {{"objective", "next-basket"}, {"split_seed", "42"}});
  const Checkpoint c = from_bytes(bytes);
  CHECK(c.model.config == m.config);
  CHECK(c.metadata.at("split_seed") == "42");
  CHECK_FALSE(c.optimizer.has_value());
  const auto a = m.params.all();
  const auto b = c.model.params.all();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value == b[i]->value);
    CHECK(a[i]->trainable == b[i]->trainable);
  }
  CHECK(to_bytes(c.model, c.metadata) == bytes);
}

TEST_CASE("optimizer state survives the round trip") {
  LensModel m = LensModel::create(model_preset("toy", 20, 3), 2);
  auto params = m.params.all();
  RmsProp opt;
  Rng rng(1);
  for (int s = 0; s < 3; ++s) {
    for (Parameter* p : params) fill_uniform(p->grad, rng, -1, 1);
    opt.step(params);
  }
  const Checkpoint c = from_bytes(to_bytes(m, {}, &opt));
  REQUIRE(c.optimizer.has_value());
  CHECK(c.optimizer->steps == 3);
  CHECK(c.optimizer->accumulators == opt.accumulators());
}

TEST_CASE("truncated checkpoint names the missing blob") {
  const LensModel m = LensModel::create(model_preset("toy", 20, 3), 2);
  const std::string bytes = to_bytes(m);
  const std::string message = error_of(bytes.substr(0, bytes.size() / 2));
  CHECK(message.find("truncated") != std::string::npos);
  CHECK(message.find("tensor \"") != std::string::npos);
  CHECK(error_of(bytes.substr(0, 10)).find("truncated") != std::string::npos);
}

TEST_CASE("header corruption") {
  const LensModel m = LensModel::create(model_preset("toy", 20, 3), 2);
  std::string bytes = to_bytes(m);
  std::string bad = bytes;
  bad[3] = 'Z';
  CHECK(error_of(bad).find("magic") != std::string::npos);
  bad = bytes;
  bad[8] = 7;  // version
  CHECK(error_of(bad).find("version 7") != std::string::npos);
  bad = bytes;
  bad[12] = 3;  // bytes per real
  CHECK(error_of(bad).find("precision") != std::string::npos);
}

TEST_CASE("loading into a model with a different vocabulary fails on shape") {
  const auto path = std::filesystem::temp_directory_path() / "lens_test_checkpoint.ckpt";
  save_checkpoint(path, LensModel::create(model_preset("toy", 20, 3), 2));
  LensModel other = LensModel::create(model_preset("toy", 21, 3), 2);
  try {
    load_checkpoint_into(path, other);
    FAIL("expected a shape error");
  } catch (const CompatibilityError& e) {
    CHECK(std::string(e.what()).find("shape mismatch") != std::string::npos);
  }
  LensModel same = LensModel::create(model_preset("toy", 20, 3), 99);
  load_checkpoint_into(path, same);
  CHECK(same.params.nsd_out.weight.value == load_checkpoint(path).model.params.nsd_out.weight.value);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), CompatibilityError);
  std::filesystem::remove(path);
}
