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

#ifndef LENS_DATA_HPP
#define LENS_DATA_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lens::data {

using ItemIndex = std::uint32_t;

inline constexpr ItemIndex kPad = 0;
inline constexpr ItemIndex kUnk = 1;
inline constexpr ItemIndex kEob = 2;
inline constexpr ItemIndex kFirstItem = 3;

inline constexpr std::size_t kFeatureDim = 8;
using SessionFeatures = std::array<double, kFeatureDim>;

inline constexpr std::int64_t kSecondsPerDay = 86400;

struct TransactionRecord {
  std::string tran_id;  // empty when the schema has no transaction column
  std::string client_id;
  std::string prod_id;
  std::int64_t timestamp = 0;  // seconds since the Unix epoch, UTC
  double prod_amount = 0;
  double prod_qty = 0;
};

/// Column mapping for delimited transaction exports.
struct CsvSchema {
  char delimiter = ',';
  std::string tran_id = "TRAN_ID";  // empty: sessions fall back to calendar days
  std::string client_id = "CLIENT_ID";
  std::string prod_id = "PROD_ID";
  std::string timestamp = "TIMESTAMP";
  std::string prod_amount = "PROD_AMOUNT";
  std::string prod_qty = "PRODT_QTY";
  std::string timestamp_format;  // strptime-style; empty means ISO-8601
  double max_malformed_fraction = 0.10;
};

struct RowIssue {
  std::size_t line = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<TransactionRecord> records;
  std::size_t rows = 0;       // data rows seen (header excluded)
  std::size_t malformed = 0;  // rows skipped
  std::vector<RowIssue> issues;  // first issues, with 1-based line numbers
};

/// Parses a delimited export with a header row. Missing required columns
/// raise ConfigError; more than max_malformed_fraction bad rows raise DataError.
ParseResult parse_transactions(std::istream& in, const CsvSchema& schema);

/// Parses "YYYY-MM-DD[( |T)HH:MM[:SS]][Z]" or a strptime-style pattern.
std::optional<std::int64_t> parse_timestamp(std::string_view text, const std::string& format = {});

/// Bidirectional item <-> index map with PAD/UNK/EOB reserved at 0..2.
class ItemVocab {
 public:
  ItemVocab();

  ItemIndex add(std::string_view item);
  std::optional<ItemIndex> find(std::string_view item) const;
  /// Index of `item`, or kUnk when it is not in the vocabulary.
  ItemIndex lookup(std::string_view item) const;
  const std::string& item(ItemIndex index) const;

  std::size_t size() const noexcept { return names_.size(); }  // reserved included
  std::size_t item_count() const noexcept { return names_.size() - kFirstItem; }
  std::span<const std::string> names() const noexcept { return names_; }

  /// FNV-1a over the item names in index order.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, ItemIndex> index_;
};

/// Vocabulary over distinct prod_ids in first-appearance order.
ItemVocab build_vocab(std::span<const TransactionRecord> records);

struct Session {
  std::string tran_id;
  std::vector<ItemIndex> items;   // strictly increasing, no reserved indices
  std::vector<double> item_qty;   // parallel to items, summed over duplicate rows
  double total_amount = 0;
  double total_qty = 0;
  std::int64_t timestamp = 0;

  bool operator==(const Session&) const = default;
};

struct Funnel {
  std::string client_id;
  std::uint32_t user_index = 0;
  std::vector<Session> sessions;           // time-ordered, ties by tran_id
  std::vector<SessionFeatures> features;   // one per session

  std::size_t length() const noexcept { return sessions.size(); }
  bool operator==(const Funnel&) const = default;
};

struct AssemblyStats {
  std::size_t unknown_items = 0;    // item rows mapped to UNK and dropped
  std::size_t empty_sessions = 0;   // sessions left with no known item
};

/// Groups records into one funnel per client (first-appearance order) and one
/// session per (client, tran_id), or per calendar day when tran_id is empty.
std::vector<Funnel> assemble_funnels(std::span<const TransactionRecord> records,
                                     const ItemVocab& vocab, AssemblyStats* stats = nullptr);

/// [dt_days, log1p(amount), log1p(qty), log1p(size), sin/cos weekday, sin/cos day-of-month].
/// Weekday 0 is Monday; dt_days is 0 without a previous session.
SessionFeatures compute_session_features(const Session& session, const Session* previous);

/// Days since the epoch and the derived calendar parts of a UTC timestamp.
struct CalendarDay {
  std::int64_t days_since_epoch;
  int weekday;       // 0 = Monday
  int day_of_month;  // 1..31
};
CalendarDay calendar_day(std::int64_t timestamp);

void recompute_features(Funnel& funnel);

struct TrainingSlice {
  std::size_t funnel_index = 0;
  std::size_t prefix_length = 0;  // sessions [0, prefix_length) are the input

  bool operator==(const TrainingSlice&) const = default;
};

/// One slice per prefix length T in [min_sessions - 1, length - 1]; empty for
/// funnels shorter than min_sessions.
std::vector<TrainingSlice> make_training_slices(const Funnel& funnel, std::size_t funnel_index,
                                                std::size_t min_sessions = 3);

std::vector<TrainingSlice> collect_training_slices(std::span<const Funnel> funnels,
                                                   std::size_t min_sessions,
                                                   std::size_t* excluded_funnels = nullptr);

struct ValidationPair {
  std::size_t funnel_index = 0;  // into DataSplit::train; the whole funnel is the prefix
  Session target;
  double target_dt_days = 0;
};

struct DataSplit {
  std::vector<Funnel> train;
  std::vector<ValidationPair> validation;
  std::size_t eligible = 0;
};

/// Holds out the last session of round-half-up(fraction * eligible) randomly
/// chosen funnels, where eligible means length >= min_sessions.
DataSplit split_train_validation(std::span<const Funnel> funnels, double holdout_fraction,
                                 std::uint64_t seed, std::size_t min_sessions = 3);

/// Funnel store container ("LENSDATA").
struct FunnelStore {
  ItemVocab vocab;
  std::vector<Funnel> funnels;
};

inline constexpr std::uint32_t kStoreVersion = 1;

void write_store(std::ostream& out, const FunnelStore& store);
FunnelStore read_store(std::istream& in);
void save_store(const std::filesystem::path& path, const FunnelStore& store);
FunnelStore load_store(const std::filesystem::path& path);

}  // namespace lens::data

#endif  // LENS_DATA_HPP
