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

#include "lens/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/tokenizer.hpp>

#include "lens/binary_io.hpp"
#include "lens/error.hpp"
#include "lens/random.hpp"

namespace lens::data {

namespace {

constexpr std::size_t kMaxStoredIssues = 100;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_real(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::optional<std::int64_t> to_epoch_seconds(int y, unsigned mo, unsigned d, int h, int mi, int s) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) return std::nullopt;
  const auto days_since = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days_since) * kSecondsPerDay + h * 3600 + mi * 60 + s;
}

std::vector<std::string> split_fields(const std::string& line, char delimiter) {
  using Separator = boost::escaped_list_separator<char>;
  boost::tokenizer<Separator> tokens(line, Separator('\\', delimiter, '"'));
  return {tokens.begin(), tokens.end()};
}

std::string day_key(std::int64_t timestamp) {
  using namespace std::chrono;
  const CalendarDay cd = calendar_day(timestamp);
  const year_month_day ymd{sys_days{days{cd.days_since_epoch}}};
  std::ostringstream out;
  out << "day:" << static_cast<int>(ymd.year()) << '-' << std::setw(2) << std::setfill('0')
      << static_cast<unsigned>(ymd.month()) << '-' << std::setw(2)
      << static_cast<unsigned>(ymd.day());
  return out.str();
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text, const std::string& format) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (!format.empty()) {
    std::tm tm{};
    std::istringstream in{std::string(text)};
    in >> std::get_time(&tm, format.c_str());
    if (in.fail()) return std::nullopt;
    return to_epoch_seconds(tm.tm_year + 1900, static_cast<unsigned>(tm.tm_mon + 1),
                            static_cast<unsigned>(tm.tm_mday), tm.tm_hour, tm.tm_min, tm.tm_sec);
  }
  // ISO-8601: YYYY-MM-DD, optionally followed by [ T]HH:MM[:SS[.fff]][Z]
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned mo = 0, d = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  int h = 0, mi = 0, s = 0;
  std::string_view rest = text.substr(10);
  if (!rest.empty()) {
    if (rest.front() != 'T' && rest.front() != ' ') return std::nullopt;
    rest.remove_prefix(1);
    if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
    if (rest.size() < 5 || rest[2] != ':') return std::nullopt;
    if (!parse_int(rest.substr(0, 2), h) || !parse_int(rest.substr(3, 2), mi)) return std::nullopt;
    rest.remove_prefix(5);
    if (!rest.empty()) {
      if (rest.size() < 3 || rest[0] != ':' || !parse_int(rest.substr(1, 2), s)) return std::nullopt;
      rest.remove_prefix(3);
      if (!rest.empty()) {
        if (rest.front() != '.') return std::nullopt;
        rest.remove_prefix(1);
        std::uint64_t frac = 0;
        if (!parse_int(rest, frac)) return std::nullopt;
      }
    }
  }
  return to_epoch_seconds(y, mo, d, h, mi, s);
}

ParseResult parse_transactions(std::istream& in, const CsvSchema& schema) {
  ParseResult result;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("transaction input has no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  try {
    header = split_fields(line, schema.delimiter);
  } catch (const boost::escaped_list_error& e) {
    throw ConfigError(std::string("unreadable header row: ") + e.what());
  }
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    if (name.empty()) {
      if (required) throw ConfigError("required column mapping is empty");
      return std::nullopt;
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw ConfigError("missing required column \"" + name + "\" in header");
  };
  const auto col_tran = column(schema.tran_id, false);
  const std::size_t col_client = *column(schema.client_id, true);
  const std::size_t col_prod = *column(schema.prod_id, true);
  const std::size_t col_time = *column(schema.timestamp, true);
  const std::size_t col_amount = *column(schema.prod_amount, true);
  const std::size_t col_qty = *column(schema.prod_qty, true);

  std::size_t line_no = 1;
  auto reject = [&](std::string reason) {
    ++result.malformed;
    if (result.issues.size() < kMaxStoredIssues) result.issues.push_back({line_no, std::move(reason)});
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++result.rows;
    std::vector<std::string> fields;
    try {
      fields = split_fields(line, schema.delimiter);
    } catch (const boost::escaped_list_error& e) {
      reject(std::string("unparseable row: ") + e.what());
      continue;
    }
    if (fields.size() < header.size()) {
      reject("expected " + std::to_string(header.size()) + " fields, found " +
             std::to_string(fields.size()));
      continue;
    }
    TransactionRecord rec;
    if (col_tran) rec.tran_id = std::string(trim(fields[*col_tran]));
    rec.client_id = std::string(trim(fields[col_client]));
    rec.prod_id = std::string(trim(fields[col_prod]));
    if ((col_tran && rec.tran_id.empty()) || rec.client_id.empty() || rec.prod_id.empty()) {
      reject("empty identifier field");
      continue;
    }
    const auto ts = parse_timestamp(fields[col_time], schema.timestamp_format);
    if (!ts) {
      reject("unparseable timestamp \"" + fields[col_time] + "\"");
      continue;
    }
    const auto amount = parse_real(fields[col_amount]);
    if (!amount) {
      reject("unparseable amount \"" + fields[col_amount] + "\"");
      continue;
    }
    const auto qty = parse_real(fields[col_qty]);
    if (!qty || *qty <= 0) {
      reject("quantity must be a positive number, got \"" + fields[col_qty] + "\"");
      continue;
    }
    rec.timestamp = *ts;
    rec.prod_amount = *amount;
    rec.prod_qty = *qty;
    result.records.push_back(std::move(rec));
  }

  if (result.rows > 0 && static_cast<double>(result.malformed) >
                             schema.max_malformed_fraction * static_cast<double>(result.rows)) {
    std::ostringstream msg;
    msg << result.malformed << " of " << result.rows << " rows are malformed (limit "
        << schema.max_malformed_fraction * 100 << "%)";
    if (!result.issues.empty()) {
      msg << "; first at line " << result.issues.front().line << ": " << result.issues.front().reason;
    }
    throw DataError(msg.str());
  }
  return result;
}

ItemVocab::ItemVocab() : names_{"<pad>", "<unk>", "<eob>"} {}

ItemIndex ItemVocab::add(std::string_view item) {
  if (auto found = find(item)) return *found;
  const auto index = static_cast<ItemIndex>(names_.size());
  names_.emplace_back(item);
  index_.emplace(names_.back(), index);
  return index;
}

std::optional<ItemIndex> ItemVocab::find(std::string_view item) const {
  if (auto it = index_.find(std::string(item)); it != index_.end()) return it->second;
  return std::nullopt;
}

ItemIndex ItemVocab::lookup(std::string_view item) const { return find(item).value_or(kUnk); }

const std::string& ItemVocab::item(ItemIndex index) const {
  if (index >= names_.size()) throw DataError("item index " + std::to_string(index) + " out of range");
  return names_[index];
}

std::uint64_t ItemVocab::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& name : names_) {
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ItemVocab build_vocab(std::span<const TransactionRecord> records) {
  if (records.empty()) throw DataError("cannot build a vocabulary from zero records");
  ItemVocab vocab;
  for (const auto& r : records) vocab.add(r.prod_id);
  return vocab;
}

CalendarDay calendar_day(std::int64_t timestamp) {
  using namespace std::chrono;
  std::int64_t d = timestamp / kSecondsPerDay;
  if (timestamp % kSecondsPerDay < 0) --d;
  const sys_days sd{days{d}};
  const year_month_day ymd{sd};
  const weekday wd{sd};
  return CalendarDay{d, static_cast<int>(wd.iso_encoding()) - 1,
                     static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

SessionFeatures compute_session_features(const Session& session, const Session* previous) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const CalendarDay cd = calendar_day(session.timestamp);
  const double dt =
      previous ? static_cast<double>(session.timestamp - previous->timestamp) / kSecondsPerDay : 0.0;
  const double weekday_angle = two_pi * cd.weekday / 7.0;
  const double month_angle = two_pi * (cd.day_of_month - 1) / 31.0;
  return SessionFeatures{dt,
                         std::log1p(std::max(0.0, session.total_amount)),
                         std::log1p(std::max(0.0, session.total_qty)),
                         std::log1p(static_cast<double>(session.items.size())),
                         std::sin(weekday_angle),
                         std::cos(weekday_angle),
                         std::sin(month_angle),
                         std::cos(month_angle)};
}

void recompute_features(Funnel& funnel) {
  funnel.features.clear();
  funnel.features.reserve(funnel.sessions.size());
  for (std::size_t i = 0; i < funnel.sessions.size(); ++i) {
    funnel.features.push_back(
        compute_session_features(funnel.sessions[i], i == 0 ? nullptr : &funnel.sessions[i - 1]));
  }
}

std::vector<Funnel> assemble_funnels(std::span<const TransactionRecord> records,
                                     const ItemVocab& vocab, AssemblyStats* stats) {
  struct SessionBuilder {
    std::string tran_id;
    std::int64_t timestamp = 0;
    double amount = 0;
    double qty = 0;
    std::map<ItemIndex, double> items;
  };
  struct FunnelBuilder {
    std::string client_id;
    std::vector<SessionBuilder> sessions;
    std::unordered_map<std::string, std::size_t> by_key;
  };

  AssemblyStats local;
  std::vector<FunnelBuilder> builders;
  std::unordered_map<std::string, std::size_t> by_client;
  for (const auto& r : records) {
    auto [cit, new_client] = by_client.try_emplace(r.client_id, builders.size());
    if (new_client) builders.push_back(FunnelBuilder{r.client_id, {}, {}});
    FunnelBuilder& fb = builders[cit->second];
    const std::string key = r.tran_id.empty() ? day_key(r.timestamp) : r.tran_id;
    auto [sit, new_session] = fb.by_key.try_emplace(key, fb.sessions.size());
    if (new_session) fb.sessions.push_back(SessionBuilder{key, r.timestamp, 0, 0, {}});
    SessionBuilder& sb = fb.sessions[sit->second];
    sb.timestamp = std::min(sb.timestamp, r.timestamp);
    sb.amount += r.prod_amount;
    sb.qty += r.prod_qty;
    const ItemIndex idx = vocab.lookup(r.prod_id);
    if (idx < kFirstItem) {
      ++local.unknown_items;
      continue;
    }
    sb.items[idx] += r.prod_qty;
  }

  std::vector<Funnel> funnels;
  funnels.reserve(builders.size());
  for (auto& fb : builders) {
    Funnel f;
    f.client_id = fb.client_id;
    for (auto& sb : fb.sessions) {
      if (sb.items.empty()) {
        ++local.empty_sessions;
        continue;
      }
      Session s;
      s.tran_id = sb.tran_id;
      s.timestamp = sb.timestamp;
      s.total_amount = sb.amount;
      s.total_qty = sb.qty;
      for (const auto& [idx, q] : sb.items) {
        s.items.push_back(idx);
        s.item_qty.push_back(q);
      }
      f.sessions.push_back(std::move(s));
    }
    if (f.sessions.empty()) continue;
    std::sort(f.sessions.begin(), f.sessions.end(), [](const Session& a, const Session& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.tran_id < b.tran_id;
    });
    f.user_index = static_cast<std::uint32_t>(funnels.size());
    recompute_features(f);
    funnels.push_back(std::move(f));
  }
  if (stats) *stats = local;
  return funnels;
}

std::vector<TrainingSlice> make_training_slices(const Funnel& funnel, std::size_t funnel_index,
                                                std::size_t min_sessions) {
  std::vector<TrainingSlice> slices;
  if (min_sessions < 2) throw ConfigError("min_sessions must be at least 2");
  if (funnel.length() < min_sessions) return slices;
  for (std::size_t t = min_sessions - 1; t < funnel.length(); ++t) {
    slices.push_back(TrainingSlice{funnel_index, t});
  }
  return slices;
}

std::vector<TrainingSlice> collect_training_slices(std::span<const Funnel> funnels,
                                                   std::size_t min_sessions,
                                                   std::size_t* excluded_funnels) {
  std::vector<TrainingSlice> all;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < funnels.size(); ++i) {
    auto s = make_training_slices(funnels[i], i, min_sessions);
    if (s.empty()) ++excluded;
    all.insert(all.end(), s.begin(), s.end());
  }
  if (excluded_funnels) *excluded_funnels = excluded;
  return all;
}

DataSplit split_train_validation(std::span<const Funnel> funnels, double holdout_fraction,
                                 std::uint64_t seed, std::size_t min_sessions) {
  if (!(holdout_fraction > 0 && holdout_fraction < 1)) {
    throw ConfigError("holdout fraction must be in (0, 1)");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < funnels.size(); ++i) {
    if (funnels[i].length() >= min_sessions) eligible.push_back(i);
  }
  if (eligible.size() < 2) {
    throw DataError("need at least 2 funnels with " + std::to_string(min_sessions) +
                    " sessions for a validation split, found " + std::to_string(eligible.size()));
  }
  const auto count = static_cast<std::size_t>(
      std::floor(holdout_fraction * static_cast<double>(eligible.size()) + 0.5));
  Rng rng(derive_seed(seed, 0x5e1ec7));
  rng.shuffle(std::span<std::size_t>(eligible));
  std::vector<std::size_t> chosen(eligible.begin(),
                                  eligible.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(chosen.begin(), chosen.end());

  DataSplit split;
  split.eligible = eligible.size();
  split.train.assign(funnels.begin(), funnels.end());
  for (std::size_t idx : chosen) {
    Funnel& f = split.train[idx];
    ValidationPair pair;
    pair.funnel_index = idx;
    pair.target = f.sessions.back();
    pair.target_dt_days = f.features.back()[0];
    f.sessions.pop_back();
    f.features.pop_back();
    split.validation.push_back(std::move(pair));
  }
  return split;
}

void write_store(std::ostream& out, const FunnelStore& store) {
  io::BinaryWriter w(out);
  w.magic("LENSDATA");
  w.u32(kStoreVersion);
  w.u64(store.vocab.item_count());
  for (std::size_t i = kFirstItem; i < store.vocab.size(); ++i) w.str(store.vocab.names()[i]);
  w.u64(store.funnels.size());
  for (const Funnel& f : store.funnels) {
    w.str(f.client_id);
    w.u32(f.user_index);
    w.u32(static_cast<std::uint32_t>(f.sessions.size()));
    for (const Session& s : f.sessions) {
      w.str(s.tran_id);
      w.i64(s.timestamp);
      w.f64(s.total_amount);
      w.f64(s.total_qty);
      w.u32(static_cast<std::uint32_t>(s.items.size()));
      for (std::size_t k = 0; k < s.items.size(); ++k) {
        w.u32(s.items[k]);
        w.f64(s.item_qty[k]);
      }
    }
  }
}

FunnelStore read_store(std::istream& in) {
  io::BinaryReader r(in);
  r.expect_magic("LENSDATA", "funnel store header");
  const std::uint32_t version = r.u32("store format version");
  if (version != kStoreVersion) {
    throw CompatibilityError("funnel store version " + std::to_string(version) +
                             " is not supported (expected " + std::to_string(kStoreVersion) + ")");
  }
  FunnelStore store;
  const std::uint64_t items = r.u64("vocabulary size");
  for (std::uint64_t i = 0; i < items; ++i) {
    const std::string name = r.str("vocabulary entry");
    if (store.vocab.find(name)) throw DataError("funnel store: duplicate vocabulary entry " + name);
    store.vocab.add(name);
  }
  const std::uint64_t funnel_count = r.u64("funnel count");
  for (std::uint64_t fi = 0; fi < funnel_count; ++fi) {
    Funnel f;
    f.client_id = r.str("funnel client id");
    f.user_index = r.u32("funnel user index");
    const std::uint32_t sessions = r.u32("session count");
    for (std::uint32_t si = 0; si < sessions; ++si) {
      Session s;
      s.tran_id = r.str("session id");
      s.timestamp = r.i64("session timestamp");
      s.total_amount = r.f64("session amount");
      s.total_qty = r.f64("session quantity");
      const std::uint32_t n = r.u32("basket size");
      for (std::uint32_t k = 0; k < n; ++k) {
        const ItemIndex idx = r.u32("basket item");
        if (idx < kFirstItem || idx >= store.vocab.size() || (!s.items.empty() && idx <= s.items.back())) {
          throw DataError("funnel store: invalid item index " + std::to_string(idx) +
                          " in funnel " + f.client_id);
        }
        s.items.push_back(idx);
        s.item_qty.push_back(r.f64("item quantity"));
      }
      f.sessions.push_back(std::move(s));
    }
    recompute_features(f);
    store.funnels.push_back(std::move(f));
  }
  return store;
}

void save_store(const std::filesystem::path& path, const FunnelStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_store(out, store);
}

FunnelStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open funnel store " + path.string());
  return read_store(in);
}

}  // namespace lens::data
