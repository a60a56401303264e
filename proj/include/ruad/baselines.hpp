#pragma once

// Training-free and clustering baselines.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "ruad/nn.hpp"
#include "ruad/scoring.hpp"
#include "ruad/telemetry.hpp"

namespace ruad {

struct ExpConfig {
  double alpha = 0.1;
};

// Per-feature exponential smoothing; the score of row t is the L1 distance
// between the estimate carried from t-1 and the observed row, normalized by
// the series maximum. Segments restart the estimate and score 0 at their start.
ScoreSeries exp_smoothing_scores(const NodeDataset& scaled, ExpConfig cfg);

using nn::Matrix;

// Mean silhouette with Euclidean distance. Singleton clusters contribute 0.
double silhouette(const Matrix& data, std::span<const int> assignment);

struct KMeansFit {
  Matrix centroids;  // k x N
  std::vector<int> assignment;
  double wcss = 0.0;
  std::vector<double> wcss_trace;  // per Lloyd iteration of the winning restart
};

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  std::uint64_t seed = 0;
};

std::size_t distinct_rows(const Matrix& data);

KMeansFit kmeans_fit(const Matrix& data, std::size_t k, const KMeansOptions& options);

struct SelectKResult {
  std::size_t k = 0;
  std::vector<std::pair<std::size_t, double>> silhouettes;
  KMeansFit fit;  // fit for the chosen k
};

SelectKResult select_k(const Matrix& data, std::size_t k_min, std::size_t k_max,
                       const KMeansOptions& options, std::size_t sample_cap = 2000);

std::vector<double> cluster_anomaly_probabilities(std::span<const int> assignment,
                                                  std::span<const int> labels, std::size_t k);

struct KMeansModel {
  std::size_t k = 0;
  Matrix centroids;
  std::vector<double> cluster_anomaly_prob;
  std::uint64_t seed = 0;
};

// Nearest centroid, ties to the lowest cluster id.
std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> row);

double kmeans_score(const KMeansModel& model, std::span<const double> row);

std::vector<double> dummy_scores(std::size_t n, std::uint64_t seed);

void to_json(nlohmann::json& j, const KMeansModel& m);
void from_json(const nlohmann::json& j, KMeansModel& m);

}  // namespace ruad
