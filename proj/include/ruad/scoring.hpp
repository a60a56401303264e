#pragma once

// Reconstruction-error scoring and ROC/AUC evaluation.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruad/telemetry.hpp"

namespace ruad {

struct ScoreEntry {
  Timestamp bucket_start = 0;
  double probability = 0.0;
  int label = 0;
};

struct ScoreSeries {
  std::string node_id;
  std::vector<ScoreEntry> entries;
};

struct RocPoint {
  double threshold = 0.0;  // +inf for the leading sentinel
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocReport {
  std::vector<RocPoint> points;  // threshold descending
  double auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

// Sum of absolute differences over features.
double reconstruction_error(std::span<const double> output, std::span<const double> target);

double normalize_error(double error, double max_train_error);

// Normalized error clamped to [0,1].
double anomaly_probability(double normalized_error);

int classify(double probability, double threshold);

// Exact ROC over every distinct score. Tied scores cross the threshold
// together, so the trapezoidal AUC equals the Mann-Whitney statistic.
RocReport roc_curve(std::span<const double> scores, std::span<const int> labels);
RocReport roc_curve(const ScoreSeries& series);

// Concatenates all nodes' entries and computes one ROC.
RocReport pool_nodes(std::span<const ScoreSeries> series);

void to_json(nlohmann::json& j, const RocReport& report);
void write_roc_csv(const RocReport& report, const std::filesystem::path& path);

// Score file: node_id,bucket_start,probability,label
void write_scores_csv(std::span<const ScoreSeries> series, const std::filesystem::path& path);
std::vector<ScoreSeries> read_scores_csv(const std::filesystem::path& path);

}  // namespace ruad
