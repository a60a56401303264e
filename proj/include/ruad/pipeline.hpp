#pragma once

// Per-node preprocessing: chronological split, semi-supervised filter,
// min/max scaling, time-consistency segmentation and windowing.

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "ruad/telemetry.hpp"

namespace ruad {

struct ScalerParams {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t size() const { return min.size(); }
};

void to_json(nlohmann::json& j, const ScalerParams& p);
void from_json(const nlohmann::json& j, ScalerParams& p);

struct SplitDataset {
  NodeDataset train;
  NodeDataset test;
};

// A gap-free run of rows; views into the dataset it was cut from.
struct Segment {
  std::span<const AggregatedFrame> frames;
  std::span<const LabelEntry> labels;

  std::size_t size() const { return frames.size(); }
};

// Sliding windows over concatenated segment rows. Each window is a
// contiguous W x N block of `rows`, so its target is simply the last row.
class WindowSet {
 public:
  struct Entry {
    std::size_t first_row = 0;
    int target_label = 0;
    Timestamp target_bucket_start = 0;
  };

  WindowSet() = default;
  WindowSet(std::size_t window_length, std::size_t feature_count)
      : window_length_(window_length), feature_count_(feature_count) {}

  std::size_t window_length() const { return window_length_; }
  std::size_t feature_count() const { return feature_count_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::span<const double> sequence(std::size_t i) const;
  std::span<const double> target(std::size_t i) const;
  const Entry& entry(std::size_t i) const { return entries_[i]; }

  void append_segment(const Segment& segment);

 private:
  std::size_t window_length_ = 1;
  std::size_t feature_count_ = 0;
  std::vector<double> rows_;
  std::vector<Entry> entries_;
};

SplitDataset chronological_split(const NodeDataset& dataset, double ratio);

NodeDataset semi_supervised_filter(const NodeDataset& dataset);

ScalerParams fit_minmax(const NodeDataset& train);

NodeDataset apply_minmax(const ScalerParams& params, const NodeDataset& dataset);

std::vector<Segment> time_consistency_segments(const NodeDataset& dataset);

// The whole dataset as one segment, for regimes without the time-consistency filter.
Segment whole_dataset_segment(const NodeDataset& dataset);

WindowSet make_windows(std::span<const Segment> segments, std::size_t window_length);

}  // namespace ruad
