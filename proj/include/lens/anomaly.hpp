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

#ifndef LENS_ANOMALY_HPP
#define LENS_ANOMALY_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lens/data.hpp"
#include "lens/model.hpp"

namespace lens::anomaly {

using Point = std::vector<double>;

/// 1 - |P n R| / |P u R| over item sets; 0 when both are empty.
double jaccard_distance(std::span<const data::ItemIndex> predicted, std::span<const data::ItemIndex> observed);

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<Point> centroids;
  double inertia = 0;                // within-cluster sum of squares
  std::vector<double> inertia_trace;  // best restart, one value per assignment step
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia wins (first on ties).
KMeansResult kmeans(std::span<const Point> points, std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                    std::size_t max_iterations = 300);

/// Mean silhouette over points (singleton-cluster points count as 0). Above
/// `sample_limit` points a seed-fixed sample of that size is scored.
double silhouette(std::span<const Point> points, std::span<const std::size_t> assignment, std::uint64_t seed = 0,
                  std::size_t sample_limit = 5000);

struct Clustering {
  std::size_t k = 1;
  std::vector<std::size_t> assignment;
  std::optional<double> silhouette;
  std::vector<std::pair<std::size_t, double>> silhouette_by_k;
  std::vector<std::string> warnings;
};

/// k-means for every K in [k_min, min(k_max, N - 1)]; keeps the K with the
/// highest mean silhouette (smallest K on ties).
Clustering cluster_funnels(std::span<const Point> embeddings, std::size_t k_min, std::size_t k_max,
                           std::uint64_t seed, std::size_t restarts = 10, std::size_t max_iterations = 300);

inline constexpr double kScoreEpsilon = 1e-9;

/// |d - median| / (MAD + eps) within each cluster; singleton clusters score 0.
std::vector<double> score_outliers(std::span<const double> distances, std::span<const std::size_t> assignment,
                                   double eps = kScoreEpsilon);

struct AnomalyConfig {
  std::size_t min_sessions = 3;  // eligible funnels have at least min_sessions + 1 sessions
  std::size_t k_min = 2;
  std::size_t k_max = 8;
  double threshold = 3.0;
  std::uint64_t seed = 42;
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  std::size_t workers = 1;

  void validate() const;
};

struct PredictionCheck {
  std::vector<data::ItemIndex> predicted;
  std::vector<data::ItemIndex> observed;
  double distance = 0;
  Tensor embedding;  // prefix state
};

/// Decodes the last session from all earlier ones and compares it with the observed one.
PredictionCheck prediction_distance(const LensModel& model, const data::Funnel& funnel);

struct FunnelAnomaly {
  std::string client_id;
  double distance = 0;
  std::size_t cluster = 0;
  double score = 0;
  bool flagged = false;
  std::vector<data::ItemIndex> predicted;
  std::vector<data::ItemIndex> observed;
};

struct AnomalyReport {
  std::vector<FunnelAnomaly> funnels;  // score descending, ties by client_id
  std::size_t k = 1;
  std::vector<std::size_t> cluster_sizes;
  std::optional<double> silhouette;
  std::vector<std::pair<std::size_t, double>> silhouette_by_k;
  std::size_t excluded = 0;
  std::size_t flagged = 0;
  std::vector<std::string> warnings;
  AnomalyConfig config;
};

/// Distances for every eligible funnel, then clustering of the prefix states,
/// then within-cluster scoring. Throws DataError below 4 eligible funnels.
AnomalyReport detect(const LensModel& model, std::span<const data::Funnel> funnels, const AnomalyConfig& config);

/// client_id, d_A, cluster, score, flagged (tab-separated, with header).
void write_report_tsv(std::ostream& out, const AnomalyReport& report);
std::string report_json(const AnomalyReport& report);

}  // namespace lens::anomaly

#endif  // LENS_ANOMALY_HPP
