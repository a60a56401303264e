#include "ruad/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "ruad/csv.hpp"
#include "ruad/error.hpp"

namespace ruad {

namespace {

constexpr const char* kAggregateSuffixes[] = {"_min", "_max", "_avg", "_var"};

void check_sample(const RawSample& s) {
  if (s.timestamp < 0) throw DataError("negative timestamp for metric '" + s.metric + "'");
  if (!std::isfinite(s.value)) {
    throw DataError("non-finite value for metric '" + s.metric + "' at " +
                    std::to_string(s.timestamp));
  }
}

}  // namespace

SubsystemState parse_state(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ok") return SubsystemState::ok;
  if (lower == "warning") return SubsystemState::warning;
  if (lower == "critical") return SubsystemState::critical;
  throw DataError("unknown subsystem state '" + std::string(text) + "'");
}

std::size_t NodeDataset::feature_count() const {
  if (!frames.empty()) return frames.front().features.size();
  return feature_names.size();
}

void NodeDataset::validate() const {
  if (frames.size() != labels.entries.size()) {
    throw DataError("dataset '" + node_id + "': frame and label counts differ");
  }
  const std::size_t n = feature_count();
  if (!feature_names.empty() && feature_names.size() != n) {
    throw DataError("dataset '" + node_id + "': feature name count does not match width");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].features.size() != n) {
      throw DataError("dataset '" + node_id + "': ragged feature rows");
    }
    if (frames[i].bucket_start != labels.entries[i].bucket_start) {
      throw DataError("dataset '" + node_id + "': labels not aligned with frames");
    }
    if (i > 0 && frames[i].bucket_start <= frames[i - 1].bucket_start) {
      throw DataError("dataset '" + node_id + "': bucket starts not strictly increasing");
    }
    const int label = labels.entries[i].label;
    if (label != 0 && label != 1) throw DataError("dataset '" + node_id + "': label not in {0,1}");
  }
}

BucketStats bucket_stats(std::span<const double> values) {
  if (values.empty()) return {};
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  BucketStats s;
  s.min = sorted.front();
  s.max = sorted.back();
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double n = static_cast<double>(sorted.size());
  s.avg = std::clamp(sum / n, s.min, s.max);
  double sq = 0.0;
  for (double v : sorted) sq += (v - s.avg) * (v - s.avg);
  s.var = sq / n;
  return s;
}

std::vector<std::string> feature_names(std::span<const std::string> metric_order) {
  std::vector<std::string> names;
  names.reserve(metric_order.size() * 4);
  for (const auto& metric : metric_order) {
    for (const char* suffix : kAggregateSuffixes) names.push_back(metric + suffix);
  }
  return names;
}

std::vector<AggregatedFrame> aggregate_quarter_hour(std::span<const RawSample> samples,
                                                    std::span<const std::string> metric_order) {
  if (metric_order.empty()) throw DataError("metric order is empty");
  if (samples.empty()) return {};

  std::unordered_map<std::string, std::size_t> metric_index;
  for (std::size_t i = 0; i < metric_order.size(); ++i) {
    if (!metric_index.emplace(metric_order[i], i).second) {
      throw DataError("duplicate metric '" + metric_order[i] + "' in metric order");
    }
  }

  std::map<Timestamp, std::vector<std::vector<double>>> buckets;
  for (const auto& s : samples) {
    check_sample(s);
    const auto it = metric_index.find(s.metric);
    if (it == metric_index.end()) {
      throw DataError("unknown metric '" + s.metric + "' at " + std::to_string(s.timestamp));
    }
    auto& per_metric = buckets[bucket_of(s.timestamp)];
    if (per_metric.empty()) per_metric.resize(metric_order.size());
    per_metric[it->second].push_back(s.value);
  }

  std::vector<AggregatedFrame> frames;
  frames.reserve(buckets.size());
  for (const auto& [start, per_metric] : buckets) {
    const bool complete = std::all_of(per_metric.begin(), per_metric.end(),
                                      [](const auto& v) { return !v.empty(); });
    if (!complete) continue;
    AggregatedFrame frame;
    frame.bucket_start = start;
    frame.features.reserve(metric_order.size() * 4);
    for (const auto& values : per_metric) {
      const auto st = bucket_stats(values);
      frame.features.insert(frame.features.end(), {st.min, st.max, st.avg, st.var});
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

LabelSeries derive_node_anomaly(std::span<const SubsystemReport> reports,
                                std::span<const Interval> false_positive_intervals) {
  for (const auto& iv : false_positive_intervals) {
    if (iv.start > iv.end) throw DataError("false-positive interval with start > end");
  }
  auto is_false_positive = [&](Timestamp t) {
    return std::any_of(false_positive_intervals.begin(), false_positive_intervals.end(),
                       [t](const Interval& iv) { return iv.start <= t && t <= iv.end; });
  };

  std::map<Timestamp, int> buckets;
  for (const auto& r : reports) {
    auto& label = buckets[bucket_of(r.timestamp)];
    if (r.state == SubsystemState::critical && !is_false_positive(r.timestamp)) label = 1;
  }
  LabelSeries series;
  series.entries.reserve(buckets.size());
  for (const auto& [start, label] : buckets) series.entries.push_back({start, label});
  return series;
}

NodeDataset align_labels(std::string node_id, std::vector<std::string> names,
                         std::span<const AggregatedFrame> frames, const LabelSeries& labels) {
  std::map<Timestamp, int> by_bucket;
  for (const auto& e : labels.entries) by_bucket[e.bucket_start] = e.label;

  NodeDataset ds;
  ds.node_id = std::move(node_id);
  ds.feature_names = std::move(names);
  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frames[a].bucket_start < frames[b].bucket_start;
  });
  for (std::size_t i : order) {
    const auto it = by_bucket.find(frames[i].bucket_start);
    if (it == by_bucket.end()) continue;
    if (!ds.frames.empty() && ds.frames.back().bucket_start == frames[i].bucket_start) {
      throw DataError("duplicate frame for bucket " + std::to_string(frames[i].bucket_start));
    }
    ds.frames.push_back(frames[i]);
    ds.labels.entries.push_back({frames[i].bucket_start, it->second});
  }
  if (ds.frames.empty()) throw DataError("empty dataset: frames and labels share no bucket");
  ds.validate();
  return ds;
}

std::vector<RawSample> read_raw_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto ts = table.column("timestamp");
  const auto metric = table.column("metric");
  const auto value = table.column("value");
  std::vector<RawSample> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    RawSample s{csv::to_int(row[ts]), row[metric], csv::to_double(row[value])};
    check_sample(s);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SubsystemReport> read_reports_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto ts = table.column("timestamp");
  const auto subsystem = table.column("subsystem");
  const auto state = table.column("state");
  std::vector<SubsystemReport> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    out.push_back({csv::to_int(row[ts]), row[subsystem], parse_state(row[state])});
  }
  return out;
}

std::vector<Interval> read_intervals_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto start = table.column("start");
  const auto end = table.column("end");
  std::vector<Interval> out;
  for (const auto& row : table.rows) {
    Interval iv{csv::to_int(row[start]), csv::to_int(row[end])};
    if (iv.start > iv.end) throw DataError(path.string() + ": interval with start > end");
    out.push_back(iv);
  }
  return out;
}

NodeDataset read_dataset_csv(const std::filesystem::path& path, std::string node_id) {
  const auto table = csv::read(path);
  if (table.header.size() < 3 || table.header[0] != "bucket_start" || table.header[1] != "label") {
    throw DataError(path.string() + ": expected header 'bucket_start,label,<features...>'");
  }
  NodeDataset ds;
  ds.node_id = std::move(node_id);
  ds.feature_names.assign(table.header.begin() + 2, table.header.end());
  ds.frames.reserve(table.rows.size());
  ds.labels.entries.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    AggregatedFrame frame;
    frame.bucket_start = csv::to_int(row[0]);
    const int label = static_cast<int>(csv::to_int(row[1]));
    frame.features.reserve(row.size() - 2);
    for (std::size_t c = 2; c < row.size(); ++c) {
      const double v = csv::to_double(row[c]);
      if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite feature value");
      frame.features.push_back(v);
    }
    ds.labels.entries.push_back({frame.bucket_start, label});
    ds.frames.push_back(std::move(frame));
  }
  try {
    ds.validate();
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return ds;
}

void write_dataset_csv(const NodeDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "bucket_start,label";
  for (const auto& name : dataset.feature_names) out << ',' << name;
  out << '\n';
  std::string line;
  for (std::size_t i = 0; i < dataset.frames.size(); ++i) {
    line = std::to_string(dataset.frames[i].bucket_start);
    line += ',';
    line += std::to_string(dataset.labels.entries[i].label);
    for (double v : dataset.frames[i].features) {
      line += ',';
      line += csv::format_double(v);
    }
    line += '\n';
    out << line;
  }
}

void write_raw_csv(std::span<const RawSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "timestamp,metric,value\n";
  for (const auto& s : samples) {
    out << s.timestamp << ',' << s.metric << ',' << csv::format_double(s.value) << '\n';
  }
}

}  // namespace ruad
