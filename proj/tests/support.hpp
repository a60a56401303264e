#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ruad/telemetry.hpp"

namespace ruad::test {

// One feature column per entry in `columns`; rows are buckets starting at 0.
inline NodeDataset make_dataset(const std::vector<Timestamp>& buckets, const std::vector<int>& labels,
                                const std::vector<std::vector<double>>& rows, std::string node = "n0") {
  NodeDataset d;
  d.node_id = std::move(node);
  const std::size_t n = rows.empty() ? 0 : rows.front().size();
  for (std::size_t j = 0; j < n; ++j) d.feature_names.push_back("f" + std::to_string(j));
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    d.frames.push_back({buckets[i], rows[i]});
    d.labels.entries.push_back({buckets[i], labels[i]});
  }
  return d;
}

inline NodeDataset contiguous_dataset(std::size_t rows, std::size_t features, std::uint64_t seed,
                                      double positive_rate = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 5.0);
  std::bernoulli_distribution pos(positive_rate);
  std::vector<Timestamp> b;
  std::vector<int> l;
  std::vector<std::vector<double>> r;
  for (std::size_t i = 0; i < rows; ++i) {
    b.push_back(static_cast<Timestamp>(i) * kBucketSeconds);
    l.push_back(pos(rng) ? 1 : 0);
    std::vector<double> row(features);
    for (auto& v : row) v = u(rng);
    r.push_back(std::move(row));
  }
  return make_dataset(b, l, r);
}

// Pairwise Mann-Whitney statistic with ties counted one half.
inline double mann_whitney(std::span<const double> s, std::span<const int> y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

}  // namespace ruad::test
