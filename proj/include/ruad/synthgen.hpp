#pragma once

// Synthetic per-node telemetry with labelled, injected anomalies.
//
// Baseline per metric: daily sinusoid + workload-regime mean (sticky Markov
// chain) + Gaussian noise whose scale depends on the regime. Anomalies are
// injected on raw samples at bucket granularity, so every aggregate of an
// affected bucket changes consistently.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruad/nn.hpp"
#include "ruad/telemetry.hpp"

namespace ruad::synth {

enum class SignatureKind { level_shift, correlation_break, temporal_disruption };

const char* kind_name(SignatureKind kind);

struct AnomalyMix {
  double level_shift = 0.15;
  double correlation_break = 0.25;
  double temporal_disruption = 0.60;
};

struct SynthConfig {
  std::size_t node_count = 8;
  std::size_t metric_count = 16;
  std::size_t timestep_count = 6000;
  double anomaly_rate = 0.01;
  AnomalyMix anomaly_mix;
  std::size_t regime_count = 4;
  double noise_std = 0.1;
  std::uint64_t seed = 20220901;
  std::size_t samples_per_bucket = 10;
  std::size_t min_duration = 4;
  std::size_t max_duration = 12;
  std::size_t lookback = 10;         // disruptions resample from this many preceding buckets
  std::size_t correlation_lag = 48;  // correlation breaks replay affected metrics from this far back
  double daily_amplitude = 1.0;      // mean per-metric daily amplitude, in scale units
  double regime_spread = 1.0;        // spread of regime means, in scale units
  double shift_min = 0.5;            // level_shift magnitude range, in scale units
  double shift_max = 1.0;
  double regime_stay = 0.98;
  double regime_risk = 4.0;  // anomaly hazard of the riskiest regime relative to the safest
  Timestamp start_time = 1577836800;

  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const SynthConfig& cfg);
void from_json(const nlohmann::json& j, SynthConfig& cfg);

struct AnomalySignature {
  SignatureKind kind = SignatureKind::level_shift;
  std::vector<std::size_t> metrics;  // affected subset (all metrics for temporal_disruption)
  double magnitude = 1.0;            // level_shift offset in units of the metric scale
  std::size_t duration = 1;
  std::size_t lag = 0;               // correlation_break history offset
};

struct InjectedAnomaly {
  std::size_t start = 0;  // bucket index
  AnomalySignature signature;
};

// Raw samples laid out as [bucket][metric][sample].
class SynthSeries {
 public:
  SynthSeries() = default;
  SynthSeries(std::vector<std::string> metric_names, std::size_t buckets, std::size_t samples_per_bucket,
              Timestamp start_time);

  std::size_t buckets() const { return buckets_; }
  std::size_t metric_count() const { return metric_names_.size(); }
  std::size_t samples_per_bucket() const { return samples_; }
  Timestamp start_time() const { return start_time_; }
  const std::vector<std::string>& metric_names() const { return metric_names_; }

  double& at(std::size_t bucket, std::size_t metric, std::size_t sample) {
    return values_[(bucket * metric_count() + metric) * samples_ + sample];
  }
  double at(std::size_t bucket, std::size_t metric, std::size_t sample) const {
    return values_[(bucket * metric_count() + metric) * samples_ + sample];
  }
  std::span<double> samples(std::size_t bucket, std::size_t metric) {
    return {values_.data() + (bucket * metric_count() + metric) * samples_, samples_};
  }
  std::span<const double> samples(std::size_t bucket, std::size_t metric) const {
    return {values_.data() + (bucket * metric_count() + metric) * samples_, samples_};
  }

  Timestamp sample_time(std::size_t bucket, std::size_t sample) const;
  std::vector<RawSample> raw_samples() const;
  std::vector<AggregatedFrame> aggregate() const;

  std::vector<double> scale;  // per-metric unit used by level shifts

 private:
  std::vector<std::string> metric_names_;
  std::size_t buckets_ = 0;
  std::size_t samples_ = 1;
  Timestamp start_time_ = 0;
  std::vector<double> values_;
};

// Generator internals exposed for verification.
struct NodeTruth {
  std::vector<int> regimes;  // per bucket
  nn::Matrix regime_means;   // regime x metric, in scale units
  std::vector<double> regime_volatility;
  std::vector<double> regime_risk;  // relative anomaly hazard per regime
  std::vector<double> level, amplitude, phase;
  std::vector<InjectedAnomaly> anomalies;  // sorted by start
};

struct GeneratedNode {
  std::string node_id;
  std::uint64_t node_seed = 0;
  SynthSeries baseline;
  SynthSeries series;  // baseline with anomalies applied
  LabelSeries labels;
  NodeTruth truth;

  NodeDataset dataset() const;
};

std::string node_name(std::size_t index);
std::uint64_t node_seed(std::uint64_t master_seed, const std::string& node_id);

GeneratedNode generate_node(const SynthConfig& cfg, const std::string& node_id, std::uint64_t node_seed);

// Applies one signature to `target` over [start, start + duration), reading
// any copied history from `baseline`. Buckets outside the interval are untouched.
void inject_anomaly(const SynthSeries& baseline, SynthSeries& target, const AnomalySignature& signature,
                    std::size_t start, std::size_t lookback, std::uint64_t seed);

}  // namespace ruad::synth
