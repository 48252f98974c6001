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

#include "lens/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <thread>

#include "lens/error.hpp"

namespace lens::eval {

namespace {

std::vector<data::ItemIndex> as_set(std::span<const data::ItemIndex> items) {
  std::vector<data::ItemIndex> s(items.begin(), items.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

BasketMetrics basket_metrics(std::span<const data::ItemIndex> predicted, std::span<const data::ItemIndex> actual) {
  const auto p = as_set(predicted);
  const auto b = as_set(actual);
  if (b.empty()) throw DataError("basket_metrics: actual basket is empty");
  std::vector<data::ItemIndex> hit;
  std::set_intersection(p.begin(), p.end(), b.begin(), b.end(), std::back_inserter(hit));
  BasketMetrics m;
  const double h = static_cast<double>(hit.size());
  m.recall = h / static_cast<double>(b.size());
  m.precision = p.empty() ? 0.0 : h / static_cast<double>(p.size());
  m.f1 = m.recall + m.precision > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

ModelPredictor::ModelPredictor(const LensModel& model, std::size_t k_max, std::string name)
    : model_(model), k_max_(k_max), name_(std::move(name)) {
  if (k_max_ == 0) throw ConfigError("k_max must be >= 1");
}

std::vector<data::ItemIndex> ModelPredictor::predict(const data::Funnel& funnel, std::size_t prefix_length) const {
  return nsd_decode_greedy(model_, funnel_state(model_, funnel, prefix_length), k_max_);
}

namespace {

/// Items ordered by descending count, then ascending index.
std::vector<data::ItemIndex> rank_counts(const std::vector<std::pair<data::ItemIndex, std::size_t>>& counts) {
  auto sorted = counts;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<data::ItemIndex> out;
  out.reserve(sorted.size());
  for (const auto& [item, n] : sorted) out.push_back(item);
  return out;
}

std::vector<std::pair<data::ItemIndex, std::size_t>> session_counts(const data::Funnel& f, std::size_t prefix) {
  std::map<data::ItemIndex, std::size_t> counts;
  for (std::size_t t = 0; t < std::min(prefix, f.length()); ++t) {
    for (data::ItemIndex item : f.sessions[t].items) ++counts[item];
  }
  return {counts.begin(), counts.end()};
}

}  // namespace

FrequencyBaseline::FrequencyBaseline(std::span<const data::Funnel> train, std::size_t k) : k_(k) {
  if (k_ == 0) throw ConfigError("baseline k must be >= 1");
  std::map<data::ItemIndex, std::size_t> counts;
  for (const auto& f : train) {
    for (const auto& s : f.sessions) {
      for (data::ItemIndex item : s.items) ++counts[item];
    }
  }
  global_ = rank_counts({counts.begin(), counts.end()});
}

std::vector<data::ItemIndex> FrequencyBaseline::predict(const data::Funnel& funnel, std::size_t prefix_length) const {
  std::vector<data::ItemIndex> out = rank_counts(session_counts(funnel, prefix_length));
  if (out.size() > k_) out.resize(k_);
  for (std::size_t i = 0; i < global_.size() && out.size() < k_; ++i) {
    if (std::find(out.begin(), out.end(), global_[i]) == out.end()) out.push_back(global_[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

EvaluationResult evaluate(const BasketPredictor& predictor, std::span<const data::Funnel> funnels,
                          std::span<const data::ValidationPair> pairs, std::size_t workers) {
  EvaluationResult result;
  result.predictor = predictor.name();
  std::vector<std::optional<CustomerResult>> slots(pairs.size());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const data::Funnel& f = funnels[pairs[i].funnel_index];
      if (f.length() == 0) continue;
      CustomerResult c;
      c.client_id = f.client_id;
      c.predicted = predictor.predict(f, f.length());
      c.actual = pairs[i].target.items;
      c.metrics = basket_metrics(c.predicted, c.actual);
      slots[i] = std::move(c);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, pairs.size()));
  if (workers == 1) {
    work(0, pairs.size());
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (pairs.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(pairs.size(), begin + chunk);
      if (begin < end) threads.emplace_back(work, begin, end);
    }
    for (auto& t : threads) t.join();
  }

  for (auto& slot : slots) {
    if (!slot) {
      ++result.skipped;
      continue;
    }
    result.mean.recall += slot->metrics.recall;
    result.mean.precision += slot->metrics.precision;
    result.mean.f1 += slot->metrics.f1;
    result.customers.push_back(std::move(*slot));
  }
  result.evaluated = result.customers.size();
  if (result.evaluated > 0) {
    const double n = static_cast<double>(result.evaluated);
    result.mean.recall /= n;
    result.mean.precision /= n;
    result.mean.f1 /= n;
  }
  return result;
}

double predict_tte(const LensModel& model, const data::Funnel& funnel, std::size_t prefix_length) {
  ad::Graph graph(false);
  const ad::Var state = encode_funnel(graph, model, funnel, prefix_length);
  return static_cast<double>(tte_predict(graph, model, state).item());
}

TteMetrics tte_evaluate(const TteFunction& predict, std::span<const data::Funnel> funnels,
                        std::span<const data::ValidationPair> pairs) {
  TteMetrics m;
  for (const auto& pair : pairs) {
    const data::Funnel& f = funnels[pair.funnel_index];
    if (f.length() == 0) continue;
    const double err = predict(f, f.length()) - pair.target_dt_days;
    m.mae += std::abs(err);
    m.mse += err * err;
    ++m.count;
  }
  if (m.count > 0) {
    m.mae /= static_cast<double>(m.count);
    m.mse /= static_cast<double>(m.count);
  }
  return m;
}

TteMetrics tte_evaluate(const LensModel& model, std::span<const data::Funnel> funnels,
                        std::span<const data::ValidationPair> pairs) {
  return tte_evaluate([&model](const data::Funnel& f, std::size_t t) { return predict_tte(model, f, t); },
                      funnels, pairs);
}

double median_interval(std::span<const data::Funnel> funnels) {
  std::vector<double> gaps;
  for (const auto& f : funnels) {
    for (std::size_t t = 1; t < f.features.size(); ++t) gaps.push_back(f.features[t][0]);
  }
  if (gaps.empty()) return 0;
  const std::size_t mid = gaps.size() / 2;
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid), gaps.end());
  if (gaps.size() % 2 == 1) return gaps[mid];
  const double upper = gaps[mid];
  const double lower = *std::max_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

void write_table(std::ostream& out, const std::string& dataset, std::span<const TableRow> rows) {
  out << "Dataset\t" << dataset << "\t\t\n";
  out << "Models\tRecall\tPrecision\tF1\n";
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(4);
  for (const auto& row : rows) {
    out << row.name << '\t' << row.metrics.recall << '\t' << row.metrics.precision << '\t' << row.metrics.f1 << '\n';
  }
  out.flags(flags);
}

}  // namespace lens::eval
