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

#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lens/random.hpp"

namespace lens::testing {

using data::ItemIndex;

data::Session make_session(std::vector<ItemIndex> items, std::int64_t timestamp, std::string tran_id, double amount) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  data::Session s;
  s.tran_id = std::move(tran_id);
  s.item_qty.assign(items.size(), 1.0);
  s.total_qty = static_cast<double>(items.size());
  s.items = std::move(items);
  s.total_amount = amount;
  s.timestamp = timestamp;
  return s;
}

data::Funnel make_funnel(std::string client, std::uint32_t user_index,
                         const std::vector<std::vector<ItemIndex>>& baskets, const std::vector<double>& gaps_days,
                         double start_day) {
  data::Funnel f;
  f.client_id = std::move(client);
  f.user_index = user_index;
  double day = start_day;
  for (std::size_t k = 0; k < baskets.size(); ++k) {
    if (k > 0) day += gaps_days.at(k - 1);
    const auto ts = kMonday + static_cast<std::int64_t>(std::llround(day * kDay));
    f.sessions.push_back(make_session(baskets[k], ts, f.client_id + "-" + std::to_string(k)));
  }
  data::recompute_features(f);
  return f;
}

data::Funnel make_funnel(std::string client, std::uint32_t user_index,
                         const std::vector<std::vector<ItemIndex>>& baskets, double gap_days) {
  const std::vector<double> gaps(baskets.empty() ? 0 : baskets.size() - 1, gap_days);
  return make_funnel(std::move(client), user_index, baskets, gaps);
}

data::ItemVocab numbered_vocab(std::size_t item_count) {
  data::ItemVocab v;
  for (std::size_t i = 0; i < item_count; ++i) v.add("item" + std::to_string(i + data::kFirstItem));
  return v;
}

namespace {

std::vector<ItemIndex> sample_items(Rng& rng, const std::vector<ItemIndex>& pool, std::size_t count) {
  std::vector<ItemIndex> p = pool;
  rng.shuffle(std::span<ItemIndex>(p));
  p.resize(std::min(count, p.size()));
  std::sort(p.begin(), p.end());
  return p;
}

std::vector<ItemIndex> item_range(std::size_t first, std::size_t count) {
  std::vector<ItemIndex> v(count);
  std::iota(v.begin(), v.end(), static_cast<ItemIndex>(first));
  return v;
}

std::string client_name(const char* prefix, std::size_t i) {
  std::string n = std::to_string(i);
  return prefix + std::string(4 - std::min<std::size_t>(4, n.size()), '0') + n;
}

}  // namespace

std::vector<data::Funnel> random_funnels(std::size_t n, std::size_t vocab_size, std::size_t min_len,
                                         std::size_t max_len, std::uint64_t seed, std::size_t max_basket) {
  Rng rng(seed);
  const auto pool = item_range(data::kFirstItem, vocab_size - data::kFirstItem);
  std::vector<data::Funnel> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = min_len + rng.index(max_len - min_len + 1);
    std::vector<std::vector<ItemIndex>> baskets;
    std::vector<double> gaps;
    for (std::size_t k = 0; k < len; ++k) {
      baskets.push_back(sample_items(rng, pool, 1 + rng.index(max_basket)));
      if (k > 0) gaps.push_back(rng.uniform(0.5, 20.0));
    }
    out.push_back(make_funnel(client_name("c", i), static_cast<std::uint32_t>(i), baskets, gaps));
  }
  return out;
}

Corpus alternating_corpus(std::size_t customers, std::size_t sessions, std::size_t item_count, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  c.vocab = numbered_vocab(item_count);
  const auto pool = item_range(data::kFirstItem, item_count);
  for (std::size_t i = 0; i < customers; ++i) {
    const auto x = sample_items(rng, pool, 2 + rng.index(3));
    std::vector<ItemIndex> y;
    do {
      y = sample_items(rng, pool, 2 + rng.index(3));
    } while (y == x);
    std::vector<std::vector<ItemIndex>> baskets;
    for (std::size_t k = 0; k < sessions; ++k) baskets.push_back(k % 2 == 0 ? x : y);
    c.funnels.push_back(make_funnel(client_name("alt", i), static_cast<std::uint32_t>(i), baskets, 4.0));
  }
  c.planted.assign(customers, false);
  return c;
}

Corpus persona_rule_corpus(std::size_t rule_shoppers, std::size_t noise_shoppers, std::size_t sessions,
                           std::size_t item_count, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  c.vocab = numbered_vocab(item_count);
  const std::size_t last = data::kFirstItem + item_count - 1;
  const std::vector<ItemIndex> ab{static_cast<ItemIndex>(last - 3), static_cast<ItemIndex>(last - 2)};
  const std::vector<ItemIndex> cd{static_cast<ItemIndex>(last - 1), static_cast<ItemIndex>(last)};
  const auto pool = item_range(data::kFirstItem, item_count - 4);
  std::size_t user = 0;
  for (std::size_t i = 0; i < rule_shoppers; ++i, ++user) {
    const auto favorites = sample_items(rng, pool, 12);
    std::vector<std::vector<ItemIndex>> baskets;
    const std::size_t early = 1 + rng.index(sessions - 5);  // earlier {A,B} -> {C,D}
    for (std::size_t k = 0; k + 2 < sessions; ++k) {
      if (k == early) {
        baskets.push_back(ab);
      } else if (k == early + 1) {
        baskets.push_back(cd);
      } else {
        baskets.push_back(sample_items(rng, favorites, 3));
      }
    }
    baskets.push_back(ab);
    baskets.push_back(cd);
    c.funnels.push_back(make_funnel(client_name("rule", i), static_cast<std::uint32_t>(user), baskets, 5.0));
  }
  for (std::size_t i = 0; i < noise_shoppers; ++i, ++user) {
    std::vector<std::vector<ItemIndex>> baskets;
    for (std::size_t k = 0; k < sessions; ++k) baskets.push_back(sample_items(rng, pool, 1 + rng.index(4)));
    c.funnels.push_back(make_funnel(client_name("noise", i), static_cast<std::uint32_t>(user), baskets, 5.0));
  }
  c.planted.assign(c.funnels.size(), false);
  return c;
}

Corpus anomaly_corpus(std::size_t regular, std::size_t planted, std::size_t personas, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  constexpr std::size_t kCore = 8;
  const std::size_t odd_items = 16;  // never part of a core
  const std::size_t item_count = personas * kCore + odd_items;
  c.vocab = numbered_vocab(item_count);
  std::vector<std::vector<ItemIndex>> cores;
  for (std::size_t p = 0; p < personas; ++p) cores.push_back(item_range(data::kFirstItem + p * kCore, kCore));
  const auto odd = item_range(data::kFirstItem + personas * kCore, odd_items);

  auto regular_basket = [&](const std::vector<ItemIndex>& core) {
    // Triangular drop count on {0..4}: weights 1,2,3,2,1.
    static constexpr std::size_t kWeights[] = {1, 2, 3, 2, 1};
    std::size_t u = rng.index(9);
    std::size_t drop = 0;
    while (u >= kWeights[drop]) u -= kWeights[drop++];
    return sample_items(rng, core, kCore - drop);
  };

  const std::size_t total = regular + planted;
  for (std::size_t i = 0; i < total; ++i) {
    const bool is_planted = i >= regular;
    const auto& core = cores[i % personas];
    const std::size_t len = 5 + rng.index(3);
    std::vector<std::vector<ItemIndex>> baskets;
    std::vector<double> gaps;
    for (std::size_t k = 0; k < len; ++k) {
      if (is_planted && k + 1 == len) {
        baskets.push_back(sample_items(rng, odd, 4 + rng.index(3)));
      } else {
        baskets.push_back(regular_basket(core));
      }
      if (k > 0) gaps.push_back(rng.uniform(5.0, 9.0));
    }
    c.funnels.push_back(make_funnel(client_name(is_planted ? "p" : "r", i), static_cast<std::uint32_t>(i), baskets, gaps));
    c.planted.push_back(is_planted);
  }
  return c;
}

Corpus periodic_corpus(std::size_t customers, std::size_t sessions, const std::vector<double>& periods, double jitter,
                       std::size_t item_count, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  c.vocab = numbered_vocab(item_count);
  const auto pool = item_range(data::kFirstItem, item_count);
  for (std::size_t i = 0; i < customers; ++i) {
    const double period = periods[i % periods.size()];
    std::vector<std::vector<ItemIndex>> baskets;
    std::vector<double> gaps;
    for (std::size_t k = 0; k < sessions; ++k) {
      baskets.push_back(sample_items(rng, pool, 1 + rng.index(3)));
      if (k > 0) gaps.push_back(period + rng.uniform(-jitter, jitter));
    }
    c.funnels.push_back(make_funnel(client_name("per", i), static_cast<std::uint32_t>(i), baskets, gaps,
                                    rng.uniform(0.0, 6.0)));
  }
  c.planted.assign(customers, false);
  return c;
}

std::vector<data::Funnel> truncate_last(const std::vector<data::Funnel>& funnels) {
  std::vector<data::Funnel> out = funnels;
  for (auto& f : out) {
    if (f.sessions.empty()) continue;
    f.sessions.pop_back();
    f.features.pop_back();
  }
  return out;
}

}  // namespace lens::testing
