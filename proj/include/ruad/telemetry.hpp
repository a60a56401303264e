#pragma once

// Raw and aggregated node telemetry, 15-minute aggregation and the
// node-anomaly label.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ruad {

using Timestamp = std::int64_t;  // seconds since epoch

inline constexpr Timestamp kBucketSeconds = 900;

inline constexpr Timestamp bucket_of(Timestamp t) { return t - (t % kBucketSeconds); }

struct RawSample {
  Timestamp timestamp = 0;
  std::string metric;
  double value = 0.0;
};

// Features are (min, max, avg, var) per metric, in metric order.
struct AggregatedFrame {
  Timestamp bucket_start = 0;
  std::vector<double> features;
};

enum class SubsystemState { ok, warning, critical };

SubsystemState parse_state(std::string_view text);

struct SubsystemReport {
  Timestamp timestamp = 0;
  std::string subsystem;
  SubsystemState state = SubsystemState::ok;
};

struct Interval {
  Timestamp start = 0;
  Timestamp end = 0;
};

struct LabelEntry {
  Timestamp bucket_start = 0;
  int label = 0;
};

struct LabelSeries {
  std::vector<LabelEntry> entries;
};

struct NodeDataset {
  std::string node_id;
  std::vector<std::string> feature_names;
  std::vector<AggregatedFrame> frames;
  LabelSeries labels;  // aligned 1:1 with frames

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  std::size_t feature_count() const;
  int label(std::size_t row) const { return labels.entries[row].label; }

  // Throws DataError when the dataset invariants do not hold.
  void validate() const;
};

// Summary statistics of one metric inside one bucket.
struct BucketStats {
  double min = 0.0;
  double max = 0.0;
  double avg = 0.0;
  double var = 0.0;  // population variance
};

// Order-independent: values are sorted before accumulation.
BucketStats bucket_stats(std::span<const double> values);

std::vector<std::string> feature_names(std::span<const std::string> metric_order);

std::vector<AggregatedFrame> aggregate_quarter_hour(std::span<const RawSample> samples,
                                                    std::span<const std::string> metric_order);

LabelSeries derive_node_anomaly(std::span<const SubsystemReport> reports,
                                std::span<const Interval> false_positive_intervals);

NodeDataset align_labels(std::string node_id, std::vector<std::string> feature_names,
                         std::span<const AggregatedFrame> frames, const LabelSeries& labels);

// CSV interfaces.
std::vector<RawSample> read_raw_csv(const std::filesystem::path& path);
std::vector<SubsystemReport> read_reports_csv(const std::filesystem::path& path);
std::vector<Interval> read_intervals_csv(const std::filesystem::path& path);
NodeDataset read_dataset_csv(const std::filesystem::path& path, std::string node_id);
void write_dataset_csv(const NodeDataset& dataset, const std::filesystem::path& path);
void write_raw_csv(std::span<const RawSample> samples, const std::filesystem::path& path);

}  // namespace ruad
