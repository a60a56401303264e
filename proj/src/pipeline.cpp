#include "ruad/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "ruad/error.hpp"

namespace ruad {

void to_json(nlohmann::json& j, const ScalerParams& p) { j = {{"min", p.min}, {"max", p.max}}; }

void from_json(const nlohmann::json& j, ScalerParams& p) {
  j.at("min").get_to(p.min);
  j.at("max").get_to(p.max);
  if (p.min.size() != p.max.size()) throw DataError("scaler min/max lengths differ");
}

std::span<const double> WindowSet::sequence(std::size_t i) const {
  return {rows_.data() + entries_[i].first_row * feature_count_, window_length_ * feature_count_};
}

std::span<const double> WindowSet::target(std::size_t i) const {
  const std::size_t last = entries_[i].first_row + window_length_ - 1;
  return {rows_.data() + last * feature_count_, feature_count_};
}

void WindowSet::append_segment(const Segment& segment) {
  const std::size_t length = segment.size();
  if (length < window_length_) return;
  const std::size_t base = rows_.size() / std::max<std::size_t>(feature_count_, 1);
  for (const auto& frame : segment.frames) {
    if (frame.features.size() != feature_count_) throw DataError("window feature width mismatch");
    rows_.insert(rows_.end(), frame.features.begin(), frame.features.end());
  }
  for (std::size_t start = 0; start + window_length_ <= length; ++start) {
    const std::size_t last = start + window_length_ - 1;
    entries_.push_back({base + start, segment.labels[last].label, segment.frames[last].bucket_start});
  }
}

namespace {

NodeDataset slice(const NodeDataset& ds, std::size_t begin, std::size_t end) {
  NodeDataset out;
  out.node_id = ds.node_id;
  out.feature_names = ds.feature_names;
  out.frames.assign(ds.frames.begin() + begin, ds.frames.begin() + end);
  out.labels.entries.assign(ds.labels.entries.begin() + begin, ds.labels.entries.begin() + end);
  return out;
}

}  // namespace

SplitDataset chronological_split(const NodeDataset& dataset, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0,1)");
  const std::size_t length = dataset.size();
  if (length < 2) throw DataError("dataset '" + dataset.node_id + "' has fewer than 2 rows");
  // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
  const auto train_len = static_cast<std::size_t>(std::floor(ratio * length + 1e-9));
  if (train_len == 0 || train_len >= length) {
    throw DataError("split ratio leaves an empty train or test side for '" + dataset.node_id + "'");
  }
  return {slice(dataset, 0, train_len), slice(dataset, train_len, length)};
}

NodeDataset semi_supervised_filter(const NodeDataset& dataset) {
  NodeDataset out;
  out.node_id = dataset.node_id;
  out.feature_names = dataset.feature_names;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.label(i) == 1) continue;
    out.frames.push_back(dataset.frames[i]);
    out.labels.entries.push_back(dataset.labels.entries[i]);
  }
  if (out.empty()) {
    throw DataError("semi-supervised filter removed every row of '" + dataset.node_id + "'");
  }
  return out;
}

ScalerParams fit_minmax(const NodeDataset& train) {
  if (train.empty()) throw DataError("cannot fit scaler on an empty dataset");
  const auto& first = train.frames.front().features;
  ScalerParams p{first, first};
  for (const auto& frame : train.frames) {
    if (frame.features.size() != p.size()) throw DataError("ragged rows while fitting scaler");
    for (std::size_t i = 0; i < p.size(); ++i) {
      p.min[i] = std::min(p.min[i], frame.features[i]);
      p.max[i] = std::max(p.max[i], frame.features[i]);
    }
  }
  return p;
}

NodeDataset apply_minmax(const ScalerParams& params, const NodeDataset& dataset) {
  NodeDataset out = dataset;
  for (auto& frame : out.frames) {
    if (frame.features.size() != params.size()) {
      throw DataError("scaler has " + std::to_string(params.size()) + " features, row has " +
                      std::to_string(frame.features.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double range = params.max[i] - params.min[i];
      frame.features[i] = range > 0.0 ? (frame.features[i] - params.min[i]) / range : 0.0;
    }
  }
  return out;
}

std::vector<Segment> time_consistency_segments(const NodeDataset& dataset) {
  std::vector<Segment> segments;
  const std::span<const AggregatedFrame> frames(dataset.frames);
  const std::span<const LabelEntry> labels(dataset.labels.entries);
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= frames.size(); ++i) {
    const bool cut = i == frames.size() ||
                     frames[i].bucket_start - frames[i - 1].bucket_start != kBucketSeconds;
    if (!cut) continue;
    segments.push_back({frames.subspan(begin, i - begin), labels.subspan(begin, i - begin)});
    begin = i;
  }
  return segments;
}

Segment whole_dataset_segment(const NodeDataset& dataset) {
  return {std::span<const AggregatedFrame>(dataset.frames),
          std::span<const LabelEntry>(dataset.labels.entries)};
}

WindowSet make_windows(std::span<const Segment> segments, std::size_t window_length) {
  if (window_length == 0) throw ConfigError("window length must be positive");
  std::size_t width = 0;
  for (const auto& s : segments) {
    if (s.size() > 0) {
      width = s.frames.front().features.size();
      break;
    }
  }
  WindowSet windows(window_length, width);
  for (const auto& s : segments) windows.append_segment(s);
  return windows;
}

}  // namespace ruad
