#include "ruad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ruad/csv.hpp"
#include "ruad/error.hpp"

namespace ruad {

double reconstruction_error(std::span<const double> output, std::span<const double> target) {
  if (output.size() != target.size()) {
    throw DataError("reconstruction error: length " + std::to_string(output.size()) + " vs " +
                    std::to_string(target.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) sum += std::abs(output[i] - target[i]);
  return sum;
}

double normalize_error(double error, double max_train_error) { return error / max_train_error; }

double anomaly_probability(double normalized_error) {
  if (normalized_error >= 1.0) return 1.0;
  return std::max(normalized_error, 0.0);
}

int classify(double probability, double threshold) { return probability >= threshold ? 1 : 0; }

RocReport roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("roc: scores and labels differ in length");
  RocReport report;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("roc: label not in {0,1}");
    if (!std::isfinite(scores[i])) throw DataError("roc: non-finite score");
    (labels[i] == 1 ? report.positives : report.negatives) += 1;
  }
  if (report.positives == 0) throw DataError("roc: no positive (label 1) samples");
  if (report.negatives == 0) throw DataError("roc: no negative (label 0) samples");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double pos = static_cast<double>(report.positives);
  const double neg = static_cast<double>(report.negatives);
  report.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  // Twice the area, accumulated in integer-count units until the end.
  double area2 = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    const std::size_t tp_before = tp;
    const std::size_t fp_before = fp;
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
    }
    area2 += static_cast<double>(fp - fp_before) * static_cast<double>(tp + tp_before);
    report.points.push_back({threshold, static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  report.auc = area2 / (2.0 * pos * neg);
  return report;
}

RocReport roc_curve(const ScoreSeries& series) { return pool_nodes(std::span(&series, 1)); }

RocReport pool_nodes(std::span<const ScoreSeries> series) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : series) {
    for (const auto& e : s.entries) {
      scores.push_back(e.probability);
      labels.push_back(e.label);
    }
  }
  return roc_curve(scores, labels);
}

void to_json(nlohmann::json& j, const RocReport& report) {
  auto points = nlohmann::json::array();
  for (const auto& p : report.points) {
    nlohmann::json threshold = std::isinf(p.threshold) ? nlohmann::json(nullptr) : nlohmann::json(p.threshold);
    points.push_back({threshold, p.fpr, p.tpr});
  }
  j = {{"auc", report.auc},
       {"positives", report.positives},
       {"negatives", report.negatives},
       {"points", std::move(points)}};
}

void write_roc_csv(const RocReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "threshold,fpr,tpr\n";
  for (const auto& p : report.points) {
    out << (std::isinf(p.threshold) ? std::string("inf") : csv::format_double(p.threshold)) << ','
        << csv::format_double(p.fpr) << ',' << csv::format_double(p.tpr) << '\n';
  }
}

void write_scores_csv(std::span<const ScoreSeries> series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "node_id,bucket_start,probability,label\n";
  for (const auto& s : series) {
    for (const auto& e : s.entries) {
      out << s.node_id << ',' << e.bucket_start << ',' << csv::format_double(e.probability) << ','
          << e.label << '\n';
    }
  }
}

std::vector<ScoreSeries> read_scores_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto node = table.column("node_id");
  const auto bucket = table.column("bucket_start");
  const auto prob = table.column("probability");
  const auto label = table.column("label");
  std::vector<ScoreSeries> out;
  for (const auto& row : table.rows) {
    if (out.empty() || out.back().node_id != row[node]) out.push_back({row[node], {}});
    ScoreEntry e{csv::to_int(row[bucket]), csv::to_double(row[prob]),
                 static_cast<int>(csv::to_int(row[label]))};
    if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
      throw DataError(path.string() + ": probability outside [0,1]");
    }
    out.back().entries.push_back(e);
  }
  return out;
}

}  // namespace ruad
