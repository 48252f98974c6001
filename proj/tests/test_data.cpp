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

#include <cmath>
#include <set>
#include <sstream>

#include "lens/error.hpp"
#include "lens/data.hpp"
#include "lens/random.hpp"
#include "synthetic.hpp"

using namespace lens;
using namespace lens::data;
using lens::testing::kDay;
using lens::testing::kMonday;

namespace {

const char* kHeader = "TRAN_ID,CLIENT_ID,PROD_ID,TIMESTAMP,PROD_AMOUNT,PRODT_QTY\n";

ParseResult parse(const std::string& text, CsvSchema schema = {}) {
  std::istringstream in(text);
  return parse_transactions(in, schema);
}

std::string store_bytes(const FunnelStore& s) {
  std::ostringstream out(std::ios::binary);
  write_store(out, s);
  return out.str();
}

}  // namespace

TEST_CASE("header-only file parses to zero records") {
  const ParseResult r = parse(kHeader);
  CHECK(r.records.empty());
  CHECK(r.rows == 0);
  CHECK(r.malformed == 0);
}

TEST_CASE("non-numeric quantity is skipped and counted") {
  std::string text = kHeader;
  for (int i = 0; i < 20; ++i) text += "t" + std::to_string(i) + ",c1,p1,2024-01-01,5,1\n";
  text += "t99,c1,p2,2024-01-02,5,abc\n";
  const ParseResult r = parse(text);
  CHECK(r.records.size() == 20);
  CHECK(r.malformed == 1);
  REQUIRE(r.issues.size() == 1);
  CHECK(r.issues[0].line == 22);
}

TEST_CASE("missing column is a config error naming the column") {
  const std::string text = "TRAN_ID,CLIENT_ID,TIMESTAMP,PROD_AMOUNT,PRODT_QTY\nt,c,2024-01-01,1,1\n";
  try {
    parse(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("PROD_ID") != std::string::npos);
  }
}

TEST_CASE("too many malformed rows is a data error") {
  std::string text = kHeader;
  for (int i = 0; i < 8; ++i) text += "t,c,p,2024-01-01,1,1\n";
  text += "t,c,p,not-a-date,1,1\n";
  text += "t,c,p,2024-01-01,1,-2\n";
  CHECK_THROWS_AS(parse(text), DataError);
  CsvSchema lenient;
  lenient.max_malformed_fraction = 0.5;
  CHECK(parse(text, lenient).malformed == 2);
}

TEST_CASE("quoted fields and custom delimiters") {
  CsvSchema s;
  s.delimiter = ';';
  const ParseResult r = parse("TRAN_ID;CLIENT_ID;PROD_ID;TIMESTAMP;PROD_AMOUNT;PRODT_QTY\n"
                              "t1;\"c;1\";p1;2024-03-05T10:20:30Z;2.5;3\n", s);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].client_id == "c;1");
  CHECK(r.records[0].prod_qty == 3.0);
}

TEST_CASE("timestamp parsing") {
  CHECK(parse_timestamp("2024-01-01") == kMonday);
  CHECK(parse_timestamp("2024-01-01T00:00:01Z") == kMonday + 1);
  CHECK(parse_timestamp("2024-01-02 12:00") == kMonday + kDay + 12 * 3600);
  CHECK(parse_timestamp("2024-01-01T00:00:00.250") == kMonday);
  CHECK(parse_timestamp("01/02/2024", "%m/%d/%Y") == kMonday + kDay);
  CHECK_FALSE(parse_timestamp("2024-02-30").has_value());
  CHECK_FALSE(parse_timestamp("garbage").has_value());
  CHECK_FALSE(parse_timestamp("").has_value());
}

TEST_CASE("vocabulary") {
  std::vector<TransactionRecord> recs(3);
  recs[0].prod_id = "a";
  recs[1].prod_id = "b";
  recs[2].prod_id = "a";
  const ItemVocab v = build_vocab(recs);
  CHECK(v.item_count() == 2);
  CHECK(v.size() == 5);
  CHECK(v.lookup("a") == kFirstItem);
  CHECK(v.lookup("b") == kFirstItem + 1);
  CHECK(v.lookup("never-seen") == kUnk);
  CHECK(v.item(kFirstItem) == "a");
  CHECK_THROWS_AS(build_vocab(std::span<const TransactionRecord>{}), DataError);

  SUBCASE("bijection over items") {
    const ItemVocab n = lens::testing::numbered_vocab(50);
    std::set<ItemIndex> seen;
    for (ItemIndex i = kFirstItem; i < n.size(); ++i) {
      CHECK(n.lookup(n.item(i)) == i);
      seen.insert(i);
    }
    CHECK(seen.size() == n.item_count());
  }
  SUBCASE("fingerprint depends on order") {
    ItemVocab x, y;
    x.add("a");
    x.add("b");
    y.add("b");
    y.add("a");
    CHECK(x.fingerprint() != y.fingerprint());
    CHECK(x.fingerprint() == ItemVocab(x).fingerprint());
  }
}

TEST_CASE("funnel assembly groups by transaction") {
  const auto r = parse(std::string(kHeader) +
                       "t1,c1,A,2024-01-01,1,1\n"
                       "t1,c1,B,2024-01-01,1,1\n"
                       "t2,c1,A,2024-01-04,1,1\n"
                       "t3,c2,B,2024-01-02,1,2\n"
                       "t3,c2,B,2024-01-02,1,3\n");
  const ItemVocab v = build_vocab(r.records);
  const auto funnels = assemble_funnels(r.records, v);
  REQUIRE(funnels.size() == 2);
  const Funnel& f = funnels[0];
  REQUIRE(f.length() == 2);
  CHECK(f.sessions[0].items == std::vector<ItemIndex>{v.lookup("A"), v.lookup("B")});
  CHECK(f.sessions[1].items == std::vector<ItemIndex>{v.lookup("A")});
  CHECK(f.features[1][0] == doctest::Approx(3.0));
  const Funnel& g = funnels[1];
  REQUIRE(g.length() == 1);
  CHECK(g.sessions[0].items.size() == 1);
  CHECK(g.sessions[0].item_qty[0] == 5.0);
}

TEST_CASE("missing transaction column groups by calendar day") {
  CsvSchema s;
  s.tran_id.clear();
  const auto r = parse("CLIENT_ID,PROD_ID,TIMESTAMP,PROD_AMOUNT,PRODT_QTY\n"
                       "c,A,2024-01-01T08:00,1,1\n"
                       "c,B,2024-01-01T19:00,1,1\n"
                       "c,A,2024-01-02T08:00,1,1\n", s);
  const auto funnels = assemble_funnels(r.records, build_vocab(r.records));
  REQUIRE(funnels.size() == 1);
  CHECK(funnels[0].length() == 2);
  CHECK(funnels[0].sessions[0].items.size() == 2);
}

TEST_CASE("assembly is a partition of the records") {
  lens::Rng rng(3);
  std::vector<TransactionRecord> recs;
  std::set<std::string> clients;
  std::set<std::pair<std::string, std::string>> sessions;
  for (int i = 0; i < 400; ++i) {
    TransactionRecord r;
    r.client_id = "c" + std::to_string(rng.index(25));
    r.tran_id = r.client_id + "-t" + std::to_string(rng.index(6));
    r.prod_id = "p" + std::to_string(rng.index(40));
    r.timestamp = kMonday + static_cast<std::int64_t>(rng.index(60)) * kDay;
    r.prod_qty = 1;
    clients.insert(r.client_id);
    sessions.insert({r.client_id, r.tran_id});
    recs.push_back(r);
  }
  AssemblyStats stats;
  const auto funnels = assemble_funnels(recs, build_vocab(recs), &stats);
  CHECK(funnels.size() == clients.size());
  std::size_t total_sessions = 0;
  double total_qty = 0;
  for (const auto& f : funnels) {
    total_sessions += f.length();
    for (std::size_t k = 0; k < f.length(); ++k) {
      const Session& s = f.sessions[k];
      CHECK_FALSE(s.items.empty());
      for (std::size_t j = 0; j < s.items.size(); ++j) {
        CHECK(s.items[j] >= kFirstItem);
        if (j > 0) CHECK(s.items[j] > s.items[j - 1]);
        total_qty += s.item_qty[j];
      }
      if (k > 0) CHECK(f.sessions[k - 1].timestamp <= s.timestamp);
    }
  }
  CHECK(total_sessions == sessions.size());
  CHECK(total_qty == doctest::Approx(400.0));
  CHECK(stats.unknown_items == 0);
}

TEST_CASE("session features") {
  const auto a = lens::testing::make_session({3, 4}, kMonday, "a", 10.0);
  const auto b = lens::testing::make_session({5}, kMonday + 3 * kDay, "b", 0.0);
  const SessionFeatures fa = compute_session_features(a, nullptr);
  CHECK(fa[0] == 0.0);
  CHECK(fa[1] == doctest::Approx(std::log1p(10.0)));
  CHECK(fa[2] == doctest::Approx(std::log1p(2.0)));
  CHECK(fa[3] == doctest::Approx(std::log1p(2.0)));
  CHECK(fa[4] == doctest::Approx(0.0));  // Monday
  CHECK(fa[5] == doctest::Approx(1.0));
  const double two_pi = 2 * std::acos(-1.0);
  CHECK(fa[6] == doctest::Approx(std::sin(two_pi * 0 / 31)));  // the 1st of the month
  CHECK(fa[7] == doctest::Approx(std::cos(two_pi * 0 / 31)));
  const SessionFeatures fb = compute_session_features(b, &a);
  CHECK(fb[0] == doctest::Approx(3.0));
  CHECK(fb[4] == doctest::Approx(std::sin(two_pi * 3 / 7)));
  CHECK(fb[5] == doctest::Approx(std::cos(two_pi * 3 / 7)));

  const CalendarDay cd = calendar_day(kMonday + 5 * kDay + 100);
  CHECK(cd.weekday == 5);
  CHECK(cd.day_of_month == 6);
  CHECK(calendar_day(-1).weekday == 2);  // 1969-12-31 was a Wednesday
}

TEST_CASE("training slices") {
  const auto f5 = lens::testing::make_funnel("c", 0, {{3}, {4}, {5}, {6}, {7}});
  const auto slices = make_training_slices(f5, 9, 3);
  REQUIRE(slices.size() == 3);
  CHECK(slices[0] == TrainingSlice{9, 2});
  CHECK(slices[2] == TrainingSlice{9, 4});
  const auto f2 = lens::testing::make_funnel("c", 0, {{3}, {4}});
  CHECK(make_training_slices(f2, 0, 3).empty());
  CHECK_THROWS_AS(make_training_slices(f5, 0, 1), ConfigError);

  const auto corpus = lens::testing::random_funnels(60, 30, 1, 9, 17);
  for (std::size_t min : {2u, 3u, 5u}) {
    std::size_t expected = 0, short_funnels = 0;
    for (const auto& f : corpus) {
      expected += f.length() >= min ? f.length() - min + 1 : 0;
      short_funnels += f.length() < min;
    }
    std::size_t excluded = 0;
    const auto all = collect_training_slices(corpus, min, &excluded);
    CHECK(all.size() == expected);
    CHECK(excluded == short_funnels);
    for (const auto& s : all) {
      CHECK(s.prefix_length >= 1);
      CHECK(s.prefix_length < corpus[s.funnel_index].length());
    }
  }
}

TEST_CASE("train/validation split") {
  auto funnels = lens::testing::random_funnels(12, 20, 3, 6, 5);
  funnels[0] = lens::testing::make_funnel("short0", 0, {{3}, {4}});
  funnels[1] = lens::testing::make_funnel("short1", 1, {{3}});
  const DataSplit split = split_train_validation(funnels, 0.3, 42, 3);
  CHECK(split.eligible == 10);
  REQUIRE(split.validation.size() == 3);
  for (const auto& pair : split.validation) {
    const Funnel& original = funnels[pair.funnel_index];
    CHECK(pair.target == original.sessions.back());
    CHECK(pair.target_dt_days == original.features.back()[0]);
    CHECK(split.train[pair.funnel_index].length() + 1 == original.length());
    CHECK(original.length() >= 3);
  }
  const DataSplit again = split_train_validation(funnels, 0.3, 42, 3);
  CHECK(again.train == split.train);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again.validation[i].funnel_index == split.validation[i].funnel_index);

  CHECK(split_train_validation(funnels, 0.25, 1, 3).validation.size() == 3);  // 2.5 rounds up
  CHECK_THROWS_AS(split_train_validation(funnels, 1.0, 1, 3), ConfigError);
  CHECK_THROWS_AS(split_train_validation(std::span<const Funnel>(funnels).first(2), 0.3, 1, 3), DataError);
}

TEST_CASE("funnel store round trip") {
  FunnelStore store;
  store.vocab = lens::testing::numbered_vocab(25);
  store.funnels = lens::testing::random_funnels(15, 28, 1, 6, 8);
  const std::string bytes = store_bytes(store);
  std::istringstream in(bytes);
  const FunnelStore back = read_store(in);
  CHECK(back.funnels == store.funnels);
  CHECK(back.vocab.fingerprint() == store.vocab.fingerprint());
  CHECK(store_bytes(back) == bytes);

  SUBCASE("truncation names the missing field") {
    std::istringstream cut(bytes.substr(0, bytes.size() - 5));
    try {
      read_store(cut);
      FAIL("expected error");
    } catch (const CompatibilityError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  SUBCASE("wrong magic or version") {
    std::string bad = bytes;
    bad[0] = 'X';
    std::istringstream a(bad);
    CHECK_THROWS_AS(read_store(a), CompatibilityError);
    bad = bytes;
    bad[8] = 9;
    std::istringstream b(bad);
    CHECK_THROWS_AS(read_store(b), CompatibilityError);
  }
}
