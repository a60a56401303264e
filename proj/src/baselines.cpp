#include "ruad/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ruad/error.hpp"
#include "ruad/pipeline.hpp"
#include "ruad/seed.hpp"

namespace ruad {

namespace {

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct LloydRun {
  Matrix centroids;
  std::vector<int> assignment;
  double wcss = 0.0;
  std::vector<double> trace;
};

// k-means++ seeding followed by Lloyd iterations.
LloydRun lloyd(const Matrix& data, std::size_t k, std::size_t max_iterations, std::uint64_t seed) {
  const std::size_t m = data.rows;
  const std::size_t n = data.cols;
  std::mt19937_64 rng(seed);
  LloydRun run;
  run.centroids = Matrix(k, n);

  std::vector<double> d2(m, std::numeric_limits<double>::infinity());
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = m;
      for (std::size_t i = 0; i < m; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        r -= d2[i];
        if (r < 0.0) break;
      }
    }
    std::copy_n(data.row(pick).begin(), n, run.centroids.row(c).begin());
    for (std::size_t i = 0; i < m; ++i) {
      d2[i] = std::min(d2[i], squared_distance(data.row(i).data(), run.centroids.row(c).data(), n));
    }
  }

  run.assignment.assign(m, -1);
  std::vector<double> dist(m, 0.0);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double wcss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto c = static_cast<int>(nearest_centroid(run.centroids, data.row(i)));
      dist[i] = squared_distance(data.row(i).data(), run.centroids.row(c).data(), n);
      wcss += dist[i];
      if (c != run.assignment[i]) {
        run.assignment[i] = c;
        changed = true;
      }
    }
    run.trace.push_back(wcss);
    run.wcss = wcss;
    if (!changed) break;

    Matrix sums(k, n);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto c = static_cast<std::size_t>(run.assignment[i]);
      counts[c] += 1;
      auto row = data.row(i);
      auto s = sums.row(c);
      for (std::size_t f = 0; f < n; ++f) s[f] += row[f];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster at the point farthest from its centroid.
        const auto far = static_cast<std::size_t>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy_n(data.row(far).begin(), n, run.centroids.row(c).begin());
        dist[far] = 0.0;
        continue;
      }
      auto s = sums.row(c);
      auto centroid = run.centroids.row(c);
      for (std::size_t f = 0; f < n; ++f) centroid[f] = s[f] / static_cast<double>(counts[c]);
    }
  }
  return run;
}

}  // namespace

ScoreSeries exp_smoothing_scores(const NodeDataset& scaled, ExpConfig cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw ConfigError("smoothing factor must lie in (0,1]");
  ScoreSeries series;
  series.node_id = scaled.node_id;
  if (scaled.empty()) return series;

  std::vector<double> errors;
  errors.reserve(scaled.size());
  for (const auto& segment : time_consistency_segments(scaled)) {
    std::vector<double> estimate = segment.frames.front().features;
    errors.push_back(0.0);
    for (std::size_t t = 1; t < segment.size(); ++t) {
      const auto& x = segment.frames[t].features;
      errors.push_back(reconstruction_error(estimate, x));
      for (std::size_t i = 0; i < x.size(); ++i) {
        estimate[i] = cfg.alpha * x[i] + (1.0 - cfg.alpha) * estimate[i];
      }
    }
  }
  const double max_error = *std::max_element(errors.begin(), errors.end());
  series.entries.reserve(errors.size());
  for (std::size_t t = 0; t < errors.size(); ++t) {
    const double p = max_error > 0.0 ? anomaly_probability(normalize_error(errors[t], max_error)) : 0.0;
    series.entries.push_back({scaled.frames[t].bucket_start, p, scaled.label(t)});
  }
  return series;
}

namespace {

std::vector<double> pairwise_distances(const Matrix& data) {
  const std::size_t m = data.rows;
  std::vector<double> dist(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double d = std::sqrt(squared_distance(data.row(i).data(), data.row(j).data(), data.cols));
      dist[i * m + j] = d;
      dist[j * m + i] = d;
    }
  }
  return dist;
}

double silhouette_from_distances(std::span<const double> dist, std::span<const int> assignment) {
  const std::size_t m = assignment.size();
  std::vector<int> ids(assignment.begin(), assignment.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw DataError("silhouette needs at least two non-empty clusters");

  std::vector<std::size_t> cluster(m);
  std::vector<std::size_t> sizes(ids.size(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    cluster[i] = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), assignment[i]) - ids.begin());
    sizes[cluster[i]] += 1;
  }

  std::vector<double> sum_to(ids.size());
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (sizes[cluster[i]] == 1) continue;
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    const double* row = dist.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) sum_to[cluster[j]] += row[j];
    const double a = sum_to[cluster[i]] / static_cast<double>(sizes[cluster[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ids.size(); ++c) {
      if (c == cluster[i]) continue;
      b = std::min(b, sum_to[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(m);
}

}  // namespace

double silhouette(const Matrix& data, std::span<const int> assignment) {
  if (assignment.size() != data.rows) throw DataError("silhouette: assignment length mismatch");
  return silhouette_from_distances(pairwise_distances(data), assignment);
}

std::size_t distinct_rows(const Matrix& data) {
  if (data.rows == 0) return 0;
  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&](std::size_t a, std::size_t b) {
    auto ra = data.row(a);
    auto rb = data.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t count = 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (less(order[i - 1], order[i])) ++count;
  }
  return count;
}

KMeansFit kmeans_fit(const Matrix& data, std::size_t k, const KMeansOptions& options) {
  if (k == 0) throw ConfigError("k must be positive");
  if (data.rows == 0) throw DataError("k-means on empty data");
  if (k > distinct_rows(data)) {
    throw DataError("k=" + std::to_string(k) + " exceeds the number of distinct rows");
  }
  KMeansFit best;
  best.wcss = std::numeric_limits<double>::infinity();
  const std::size_t restarts = std::max<std::size_t>(options.restarts, 1);
  for (std::size_t r = 0; r < restarts; ++r) {
    auto run = lloyd(data, k, options.max_iterations, derive_seed(options.seed, r));
    if (run.wcss < best.wcss) {
      best.centroids = std::move(run.centroids);
      best.assignment = std::move(run.assignment);
      best.wcss = run.wcss;
      best.wcss_trace = std::move(run.trace);
    }
  }
  return best;
}

SelectKResult select_k(const Matrix& data, std::size_t k_min, std::size_t k_max,
                       const KMeansOptions& options, std::size_t sample_cap) {
  const std::size_t distinct = distinct_rows(data);
  const std::size_t lo = std::max<std::size_t>(k_min, 2);
  const std::size_t hi = std::min(k_max, distinct);

  // One uniform subsample shared by every k.
  std::vector<std::size_t> sample(data.rows);
  std::iota(sample.begin(), sample.end(), std::size_t{0});
  if (sample_cap > 0 && data.rows > sample_cap) {
    std::mt19937_64 rng(derive_seed(options.seed, 0x5117));
    std::shuffle(sample.begin(), sample.end(), rng);
    sample.resize(sample_cap);
    std::sort(sample.begin(), sample.end());
  }
  Matrix sub(sample.size(), data.cols);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    std::copy_n(data.row(sample[i]).begin(), data.cols, sub.row(i).begin());
  }

  const auto sub_dist = pairwise_distances(sub);

  SelectKResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = lo; k <= hi; ++k) {
    auto fit = kmeans_fit(data, k, options);
    std::vector<int> sub_assignment(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) sub_assignment[i] = fit.assignment[sample[i]];
    double score = 0.0;
    try {
      score = silhouette_from_distances(sub_dist, sub_assignment);
    } catch (const DataError&) {
      continue;  // subsample hit fewer than two clusters
    }
    result.silhouettes.emplace_back(k, score);
    if (score > best) {
      best = score;
      result.k = k;
      result.fit = std::move(fit);
    }
  }
  if (result.k == 0) throw DataError("no feasible k in [" + std::to_string(k_min) + ", " + std::to_string(k_max) + "]");
  return result;
}

std::vector<double> cluster_anomaly_probabilities(std::span<const int> assignment,
                                                  std::span<const int> labels, std::size_t k) {
  if (assignment.size() != labels.size()) throw DataError("assignments and labels differ in length");
  std::vector<double> positives(k, 0.0);
  std::vector<double> members(k, 0.0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto c = static_cast<std::size_t>(assignment[i]);
    if (c >= k) throw DataError("cluster id out of range");
    members[c] += 1.0;
    positives[c] += labels[i] == 1 ? 1.0 : 0.0;
  }
  std::vector<double> prob(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) prob[c] = members[c] > 0.0 ? positives[c] / members[c] : 0.0;
  return prob;
}

std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> row) {
  if (row.size() != centroids.cols) throw DataError("row width does not match centroids");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = squared_distance(row.data(), centroids.row(c).data(), row.size());
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double kmeans_score(const KMeansModel& model, std::span<const double> row) {
  return model.cluster_anomaly_prob.at(nearest_centroid(model.centroids, row));
}

std::vector<double> dummy_scores(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

void to_json(nlohmann::json& j, const KMeansModel& m) {
  auto centroids = nlohmann::json::array();
  for (std::size_t c = 0; c < m.centroids.rows; ++c) {
    auto row = m.centroids.row(c);
    centroids.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j = {{"k", m.k},
       {"centroids", std::move(centroids)},
       {"cluster_anomaly_prob", m.cluster_anomaly_prob},
       {"seed", m.seed}};
}

void from_json(const nlohmann::json& j, KMeansModel& m) {
  m.k = j.at("k").get<std::size_t>();
  const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
  if (rows.size() != m.k || rows.empty()) throw DataError("k-means model: centroid count != k");
  m.centroids = Matrix(rows.size(), rows.front().size());
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (rows[c].size() != m.centroids.cols) throw DataError("k-means model: ragged centroids");
    std::copy(rows[c].begin(), rows[c].end(), m.centroids.row(c).begin());
  }
  j.at("cluster_anomaly_prob").get_to(m.cluster_anomaly_prob);
  if (m.cluster_anomaly_prob.size() != m.k) throw DataError("k-means model: probability count != k");
  m.seed = j.value("seed", std::uint64_t{0});
}

}  // namespace ruad
