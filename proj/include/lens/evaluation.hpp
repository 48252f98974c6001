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

#ifndef LENS_EVALUATION_HPP
#define LENS_EVALUATION_HPP

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lens/data.hpp"
#include "lens/model.hpp"

namespace lens::eval {

struct BasketMetrics {
  double recall = 0;
  double precision = 0;
  double f1 = 0;
};

/// Set-based recall, precision and F1; duplicates are ignored and an empty
/// prediction scores precision 0. Throws DataError if `actual` is empty.
BasketMetrics basket_metrics(std::span<const data::ItemIndex> predicted,
                             std::span<const data::ItemIndex> actual);

/// Predicts the basket that follows sessions [0, prefix_length) of a funnel.
class BasketPredictor {
 public:
  virtual ~BasketPredictor() = default;
  virtual std::vector<data::ItemIndex> predict(const data::Funnel& funnel, std::size_t prefix_length) const = 0;
  virtual std::string name() const = 0;
};

class ModelPredictor final : public BasketPredictor {
 public:
  ModelPredictor(const LensModel& model, std::size_t k_max, std::string name = "LENS");
  std::vector<data::ItemIndex> predict(const data::Funnel& funnel, std::size_t prefix_length) const override;
  std::string name() const override { return name_; }

 private:
  const LensModel& model_;
  std::size_t k_max_;
  std::string name_;
};

/// Per-customer top-k items by number of sessions containing them, ties by
/// ascending index, backfilled from the corpus-wide ranking.
class FrequencyBaseline final : public BasketPredictor {
 public:
  FrequencyBaseline(std::span<const data::Funnel> train, std::size_t k);
  std::vector<data::ItemIndex> predict(const data::Funnel& funnel, std::size_t prefix_length) const override;
  std::string name() const override { return "Frequency baseline"; }
  const std::vector<data::ItemIndex>& global_ranking() const noexcept { return global_; }

 private:
  std::size_t k_;
  std::vector<data::ItemIndex> global_;
};

struct CustomerResult {
  std::string client_id;
  std::vector<data::ItemIndex> predicted;
  std::vector<data::ItemIndex> actual;
  BasketMetrics metrics;
};

struct EvaluationResult {
  std::string predictor;
  BasketMetrics mean;  // unweighted over evaluated customers
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // customers with an empty prefix
  std::vector<CustomerResult> customers;
};

/// Scores every validation pair: predict from the whole training funnel,
/// compare with the held-out basket. `workers` > 1 splits customers across threads.
EvaluationResult evaluate(const BasketPredictor& predictor, std::span<const data::Funnel> funnels,
                          std::span<const data::ValidationPair> pairs, std::size_t workers = 1);

struct TteMetrics {
  double mae = 0;
  double mse = 0;
  std::size_t count = 0;
};

using TteFunction = std::function<double(const data::Funnel&, std::size_t prefix_length)>;

/// Days-until-next-session estimate of the model's time-to-event head.
double predict_tte(const LensModel& model, const data::Funnel& funnel, std::size_t prefix_length);

TteMetrics tte_evaluate(const TteFunction& predict, std::span<const data::Funnel> funnels,
                        std::span<const data::ValidationPair> pairs);
TteMetrics tte_evaluate(const LensModel& model, std::span<const data::Funnel> funnels,
                        std::span<const data::ValidationPair> pairs);

/// Median inter-session gap over the training funnels (a constant predictor).
double median_interval(std::span<const data::Funnel> funnels);

struct TableRow {
  std::string name;
  BasketMetrics metrics;
};

/// Tab-separated "Models / Recall / Precision / F1" rows, four decimals.
void write_table(std::ostream& out, const std::string& dataset, std::span<const TableRow> rows);

}  // namespace lens::eval

#endif  // LENS_EVALUATION_HPP
