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

#include "lens/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "lens/error.hpp"
#include "lens/random.hpp"

namespace lens::anomaly {

namespace {

double squared_distance(const Point& a, const Point& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<Point> plus_plus_seeds(std::span<const Point> points, std::size_t k, Rng& rng) {
  std::vector<Point> centroids;
  centroids.push_back(points[rng.index(points.size())]);
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  while (centroids.size() < k) {
    double total = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0) {
      pick = rng.index(points.size());
    } else {
      double target = rng.unit() * total;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        target -= d2[i];
        if (target < 0 && d2[i] > 0) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

KMeansResult lloyd(std::span<const Point> points, std::vector<Point> centroids, std::size_t max_iterations) {
  KMeansResult r;
  const std::size_t k = centroids.size();
  const std::size_t dim = points.front().size();
  r.assignment.assign(points.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double inertia = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.assignment[i] != best) changed = true;
      r.assignment[i] = best;
      inertia += best_d;
    }
    r.inertia_trace.push_back(inertia);
    r.inertia = inertia;
    r.iterations = iter + 1;
    if (!changed) break;
    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      ++counts[r.assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[r.assignment[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dim; ++j) centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  }
  r.centroids = std::move(centroids);
  return r;
}

}  // namespace

double jaccard_distance(std::span<const data::ItemIndex> predicted, std::span<const data::ItemIndex> observed) {
  std::vector<data::ItemIndex> p(predicted.begin(), predicted.end());
  std::vector<data::ItemIndex> r(observed.begin(), observed.end());
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  std::vector<data::ItemIndex> both;
  std::set_intersection(p.begin(), p.end(), r.begin(), r.end(), std::back_inserter(both));
  const std::size_t uni = p.size() + r.size() - both.size();
  if (uni == 0) return 0;
  return 1.0 - static_cast<double>(both.size()) / static_cast<double>(uni);
}

KMeansResult kmeans(std::span<const Point> points, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t max_iterations) {
  if (points.empty()) throw Error("kmeans: no points");
  if (k == 0 || k > points.size()) throw ConfigError("kmeans: k must be in [1, N]");
  if (restarts == 0 || max_iterations == 0) throw ConfigError("kmeans: restarts and iterations must be >= 1");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ShapeError("kmeans: points differ in dimension");
  }
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t restart = 0; restart < restarts; ++restart) {
    Rng rng(derive_seed(seed, (static_cast<std::uint64_t>(k) << 20) + restart));
    KMeansResult r = lloyd(points, plus_plus_seeds(points, k, rng), max_iterations);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

double silhouette(std::span<const Point> points, std::span<const std::size_t> assignment, std::uint64_t seed,
                  std::size_t sample_limit) {
  if (points.size() != assignment.size()) throw ShapeError("silhouette: assignment size mismatch");
  const std::size_t n = points.size();
  if (n == 0) return 0;
  const std::size_t labels = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<std::size_t> sizes(labels, 0);
  for (std::size_t a : assignment) ++sizes[a];

  std::vector<std::size_t> sample(n);
  std::iota(sample.begin(), sample.end(), 0);
  if (sample_limit > 0 && n > sample_limit) {
    Rng rng(derive_seed(seed, 0x5117));
    rng.shuffle(std::span<std::size_t>(sample));
    sample.resize(sample_limit);
    std::sort(sample.begin(), sample.end());
  }

  double total = 0;
  std::vector<double> sums(labels);
  for (std::size_t i : sample) {
    if (sizes[assignment[i]] <= 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[assignment[j]] += std::sqrt(squared_distance(points[i], points[j]));
    }
    const double a = sums[assignment[i]] / static_cast<double>(sizes[assignment[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < labels; ++c) {
      if (c != assignment[i] && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    if (!std::isfinite(b)) continue;
    const double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / static_cast<double>(sample.size());
}

Clustering cluster_funnels(std::span<const Point> embeddings, std::size_t k_min, std::size_t k_max,
                           std::uint64_t seed, std::size_t restarts, std::size_t max_iterations) {
  const std::size_t n = embeddings.size();
  if (n < 2) throw DataError("clustering needs at least 2 funnels");
  if (k_min < 2 || k_max < k_min) throw ConfigError("K range must satisfy 2 <= k_min <= k_max");
  Clustering out;
  const bool identical = std::all_of(embeddings.begin(), embeddings.end(),
                                     [&](const Point& p) { return p == embeddings.front(); });
  const std::size_t upper = std::min(k_max, n - 1);
  if (identical || upper < k_min) {
    out.k = 1;
    out.assignment.assign(n, 0);
    out.warnings.push_back(identical ? "all funnel embeddings are identical; using a single cluster"
                                     : "too few funnels for the K range; using a single cluster");
    return out;
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = k_min; k <= upper; ++k) {
    KMeansResult r = kmeans(embeddings, k, seed, restarts, max_iterations);
    const double s = silhouette(embeddings, r.assignment, seed);
    out.silhouette_by_k.emplace_back(k, s);
    if (s > best) {
      best = s;
      out.k = k;
      out.assignment = std::move(r.assignment);
    }
  }
  out.silhouette = best;
  return out;
}

std::vector<double> score_outliers(std::span<const double> distances, std::span<const std::size_t> assignment,
                                   double eps) {
  if (distances.size() != assignment.size()) throw ShapeError("score_outliers: assignment size mismatch");
  std::vector<double> scores(distances.size(), 0.0);
  if (distances.empty()) return scores;
  const std::size_t labels = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<std::vector<std::size_t>> members(labels);
  for (std::size_t i = 0; i < assignment.size(); ++i) members[assignment[i]].push_back(i);
  for (const auto& m : members) {
    if (m.size() < 2) continue;
    std::vector<double> values;
    for (std::size_t i : m) values.push_back(distances[i]);
    const double center = median(values);
    std::vector<double> dev;
    for (double v : values) dev.push_back(std::abs(v - center));
    const double mad = median(dev);
    for (std::size_t i : m) scores[i] = std::abs(distances[i] - center) / (mad + eps);
  }
  return scores;
}

void AnomalyConfig::validate() const {
  if (min_sessions < 2) throw ConfigError("anomaly min_sessions must be >= 2");
  if (k_min < 2 || k_max < k_min) throw ConfigError("anomaly K range must satisfy 2 <= k_min <= k_max");
  if (!(threshold >= 0)) throw ConfigError("anomaly threshold must be non-negative");
  if (restarts == 0 || max_iterations == 0) throw ConfigError("anomaly restarts and iterations must be >= 1");
}

PredictionCheck prediction_distance(const LensModel& model, const data::Funnel& funnel) {
  if (funnel.length() < 2) throw DataError("funnel " + funnel.client_id + " is too short for a prediction check");
  const std::size_t prefix = funnel.length() - 1;
  PredictionCheck c;
  c.embedding = funnel_state(model, funnel, prefix);
  c.predicted = nsd_decode_greedy(model, c.embedding, model.config.decode_max_items);
  c.observed = funnel.sessions[prefix].items;
  c.distance = jaccard_distance(c.predicted, c.observed);
  return c;
}

AnomalyReport detect(const LensModel& model, std::span<const data::Funnel> funnels, const AnomalyConfig& config) {
  config.validate();
  AnomalyReport report;
  report.config = config;

  // Canonical order so the report does not depend on input order.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < funnels.size(); ++i) {
    if (funnels[i].length() >= config.min_sessions + 1) {
      eligible.push_back(i);
    } else {
      ++report.excluded;
    }
  }
  std::sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
    return funnels[a].client_id != funnels[b].client_id ? funnels[a].client_id < funnels[b].client_id : a < b;
  });
  if (eligible.size() < 4) {
    throw DataError("anomaly detection needs at least 4 funnels with >= " +
                    std::to_string(config.min_sessions + 1) + " sessions; found " +
                    std::to_string(eligible.size()));
  }

  std::vector<PredictionCheck> checks(eligible.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) checks[i] = prediction_distance(model, funnels[eligible[i]]);
  };
  const std::size_t workers = std::clamp<std::size_t>(config.workers, 1, eligible.size());
  if (workers == 1) {
    work(0, eligible.size());
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (eligible.size() + workers - 1) / workers;
    for (std::size_t w = 0; w * chunk < eligible.size(); ++w) {
      threads.emplace_back(work, w * chunk, std::min(eligible.size(), (w + 1) * chunk));
    }
    for (auto& t : threads) t.join();
  }

  std::vector<Point> embeddings;
  std::vector<double> distances;
  for (const auto& c : checks) {
    embeddings.emplace_back(c.embedding.values().begin(), c.embedding.values().end());
    distances.push_back(c.distance);
  }
  Clustering clustering = cluster_funnels(embeddings, config.k_min, config.k_max, config.seed, config.restarts,
                                          config.max_iterations);
  const auto scores = score_outliers(distances, clustering.assignment);

  report.k = clustering.k;
  report.silhouette = clustering.silhouette;
  report.silhouette_by_k = clustering.silhouette_by_k;
  report.warnings = clustering.warnings;
  report.cluster_sizes.assign(clustering.k, 0);
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    FunnelAnomaly a;
    a.client_id = funnels[eligible[i]].client_id;
    a.distance = distances[i];
    a.cluster = clustering.assignment[i];
    a.score = scores[i];
    a.flagged = scores[i] > config.threshold;
    a.predicted = std::move(checks[i].predicted);
    a.observed = std::move(checks[i].observed);
    ++report.cluster_sizes[a.cluster];
    if (a.flagged) ++report.flagged;
    report.funnels.push_back(std::move(a));
  }
  std::stable_sort(report.funnels.begin(), report.funnels.end(), [](const FunnelAnomaly& a, const FunnelAnomaly& b) {
    return a.score > b.score;
  });
  return report;
}

void write_report_tsv(std::ostream& out, const AnomalyReport& report) {
  const auto flags = out.flags();
  out << "client_id\td_A\tcluster\tscore\tflagged\n";
  out << std::setprecision(17);
  for (const auto& f : report.funnels) {
    out << f.client_id << '\t' << f.distance << '\t' << f.cluster << '\t' << f.score << '\t'
        << (f.flagged ? 1 : 0) << '\n';
  }
  out.flags(flags);
}

std::string report_json(const AnomalyReport& r) {
  nlohmann::json by_k = nlohmann::json::array();
  for (const auto& [k, s] : r.silhouette_by_k) by_k.push_back({{"k", k}, {"silhouette", s}});
  nlohmann::json doc = {{"funnels", r.funnels.size()},
                        {"excluded", r.excluded},
                        {"flagged", r.flagged},
                        {"k", r.k},
                        {"cluster_sizes", r.cluster_sizes},
                        {"silhouette_by_k", by_k},
                        {"warnings", r.warnings},
                        {"threshold", r.config.threshold},
                        {"k_min", r.config.k_min},
                        {"k_max", r.config.k_max},
                        {"seed", r.config.seed},
                        {"min_sessions", r.config.min_sessions}};
  doc["silhouette"] = r.silhouette ? nlohmann::json(*r.silhouette) : nlohmann::json(nullptr);
  return doc.dump(2);
}

}  // namespace lens::anomaly
