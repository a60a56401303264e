#include "ruad/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "ruad/error.hpp"
#include "ruad/seed.hpp"

namespace ruad::synth {

namespace {

constexpr const char* kFamilies[] = {"cpu_load", "mem_used", "power",  "temp",
                                     "fan_speed", "net_rx",  "net_tx", "io_wait"};

std::vector<std::string> make_metric_names(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < count; ++j) {
    char idx[24];
    std::snprintf(idx, sizeof(idx), "%02zu", j);
    names.push_back(std::string(kFamilies[j % std::size(kFamilies)]) + "_" + idx);
  }
  return names;
}

std::vector<std::size_t> pick_subset(std::size_t metric_count, std::size_t size, std::mt19937_64& rng) {
  std::vector<std::size_t> all(metric_count);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::clamp<std::size_t>(size, 1, metric_count));
  std::sort(all.begin(), all.end());
  return all;
}

SignatureKind pick_kind(const AnomalyMix& mix, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < mix.level_shift) return SignatureKind::level_shift;
  if (u < mix.level_shift + mix.correlation_break) return SignatureKind::correlation_break;
  return SignatureKind::temporal_disruption;
}

}  // namespace

const char* kind_name(SignatureKind kind) {
  switch (kind) {
    case SignatureKind::level_shift:
      return "level_shift";
    case SignatureKind::correlation_break:
      return "correlation_break";
    case SignatureKind::temporal_disruption:
      break;
  }
  return "temporal_disruption";
}

void SynthConfig::validate() const {
  if (node_count == 0 || metric_count == 0 || timestep_count == 0 || regime_count == 0 ||
      samples_per_bucket == 0) {
    throw ConfigError("synthetic config: counts must be positive");
  }
  if (!(anomaly_rate >= 0.0 && anomaly_rate < 1.0)) {
    throw ConfigError("synthetic config: anomaly_rate must lie in [0,1)");
  }
  const double w[] = {anomaly_mix.level_shift, anomaly_mix.correlation_break, anomaly_mix.temporal_disruption};
  if (std::any_of(std::begin(w), std::end(w), [](double x) { return !(x >= 0.0); }) ||
      std::abs(w[0] + w[1] + w[2] - 1.0) > 1e-9) {
    throw ConfigError("synthetic config: anomaly_mix weights must be non-negative and sum to 1");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("synthetic config: noise_std must be >= 0");
  if (min_duration == 0 || min_duration > max_duration) {
    throw ConfigError("synthetic config: need 1 <= min_duration <= max_duration");
  }
  if (lookback < 2) throw ConfigError("synthetic config: lookback must be >= 2");
  if (correlation_lag == 0) throw ConfigError("synthetic config: correlation_lag must be >= 1");
  if (!(daily_amplitude >= 0.0) || !(regime_spread >= 0.0)) {
    throw ConfigError("synthetic config: daily_amplitude and regime_spread must be >= 0");
  }
  if (!(regime_risk >= 1.0)) throw ConfigError("synthetic config: regime_risk must be >= 1");
  if (!(shift_min > 0.0) || !(shift_max >= shift_min)) {
    throw ConfigError("synthetic config: need 0 < shift_min <= shift_max");
  }
  if (!(regime_stay >= 0.0 && regime_stay <= 1.0)) throw ConfigError("synthetic config: regime_stay in [0,1]");
  if (900 % static_cast<Timestamp>(samples_per_bucket) != 0) {
    throw ConfigError("synthetic config: samples_per_bucket must divide 900");
  }
  if (start_time < 0 || start_time % kBucketSeconds != 0) {
    throw ConfigError("synthetic config: start_time must be a non-negative multiple of 900");
  }
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = {{"node_count", c.node_count},
       {"metric_count", c.metric_count},
       {"timestep_count", c.timestep_count},
       {"anomaly_rate", c.anomaly_rate},
       {"anomaly_mix",
        {{"level_shift", c.anomaly_mix.level_shift},
         {"correlation_break", c.anomaly_mix.correlation_break},
         {"temporal_disruption", c.anomaly_mix.temporal_disruption}}},
       {"regime_count", c.regime_count},
       {"noise_std", c.noise_std},
       {"seed", c.seed},
       {"samples_per_bucket", c.samples_per_bucket},
       {"min_duration", c.min_duration},
       {"max_duration", c.max_duration},
       {"lookback", c.lookback},
       {"correlation_lag", c.correlation_lag},
       {"daily_amplitude", c.daily_amplitude},
       {"regime_spread", c.regime_spread},
       {"shift_min", c.shift_min},
       {"shift_max", c.shift_max},
       {"regime_stay", c.regime_stay},
       {"regime_risk", c.regime_risk},
       {"start_time", c.start_time}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  c.node_count = j.value("node_count", c.node_count);
  c.metric_count = j.value("metric_count", c.metric_count);
  c.timestep_count = j.value("timestep_count", c.timestep_count);
  c.anomaly_rate = j.value("anomaly_rate", c.anomaly_rate);
  if (j.contains("anomaly_mix")) {
    const auto& m = j.at("anomaly_mix");
    c.anomaly_mix.level_shift = m.value("level_shift", 0.0);
    c.anomaly_mix.correlation_break = m.value("correlation_break", 0.0);
    c.anomaly_mix.temporal_disruption = m.value("temporal_disruption", 0.0);
  }
  c.regime_count = j.value("regime_count", c.regime_count);
  c.noise_std = j.value("noise_std", c.noise_std);
  c.seed = j.value("seed", c.seed);
  c.samples_per_bucket = j.value("samples_per_bucket", c.samples_per_bucket);
  c.min_duration = j.value("min_duration", c.min_duration);
  c.max_duration = j.value("max_duration", c.max_duration);
  c.lookback = j.value("lookback", c.lookback);
  c.correlation_lag = j.value("correlation_lag", c.correlation_lag);
  c.daily_amplitude = j.value("daily_amplitude", c.daily_amplitude);
  c.regime_spread = j.value("regime_spread", c.regime_spread);
  c.shift_min = j.value("shift_min", c.shift_min);
  c.shift_max = j.value("shift_max", c.shift_max);
  c.regime_stay = j.value("regime_stay", c.regime_stay);
  c.regime_risk = j.value("regime_risk", c.regime_risk);
  c.start_time = j.value("start_time", c.start_time);
}

SynthSeries::SynthSeries(std::vector<std::string> metric_names, std::size_t buckets,
                         std::size_t samples_per_bucket, Timestamp start_time)
    : scale(metric_names.size(), 1.0),
      metric_names_(std::move(metric_names)),
      buckets_(buckets),
      samples_(samples_per_bucket),
      start_time_(start_time),
      values_(buckets * metric_names_.size() * samples_per_bucket, 0.0) {}

Timestamp SynthSeries::sample_time(std::size_t bucket, std::size_t sample) const {
  const Timestamp step = kBucketSeconds / static_cast<Timestamp>(samples_);
  return start_time_ + static_cast<Timestamp>(bucket) * kBucketSeconds + static_cast<Timestamp>(sample) * step;
}

std::vector<RawSample> SynthSeries::raw_samples() const {
  std::vector<RawSample> out;
  out.reserve(values_.size());
  for (std::size_t b = 0; b < buckets_; ++b) {
    for (std::size_t s = 0; s < samples_; ++s) {
      for (std::size_t m = 0; m < metric_count(); ++m) {
        out.push_back({sample_time(b, s), metric_names_[m], at(b, m, s)});
      }
    }
  }
  return out;
}

std::vector<AggregatedFrame> SynthSeries::aggregate() const {
  std::vector<AggregatedFrame> frames(buckets_);
  for (std::size_t b = 0; b < buckets_; ++b) {
    auto& f = frames[b];
    f.bucket_start = start_time_ + static_cast<Timestamp>(b) * kBucketSeconds;
    f.features.reserve(metric_count() * 4);
    for (std::size_t m = 0; m < metric_count(); ++m) {
      const auto st = bucket_stats(samples(b, m));
      f.features.insert(f.features.end(), {st.min, st.max, st.avg, st.var});
    }
  }
  return frames;
}

NodeDataset GeneratedNode::dataset() const {
  return align_labels(node_id, feature_names(series.metric_names()), series.aggregate(), labels);
}

std::string node_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "node%03zu", index);
  return buf;
}

std::uint64_t node_seed(std::uint64_t master_seed, const std::string& node_id) {
  return derive_seed(master_seed, node_id);
}

void inject_anomaly(const SynthSeries& baseline, SynthSeries& target, const AnomalySignature& sig,
                    std::size_t start, std::size_t lookback, std::uint64_t seed) {
  if (baseline.buckets() != target.buckets() || baseline.metric_count() != target.metric_count() ||
      baseline.samples_per_bucket() != target.samples_per_bucket()) {
    throw DataError("inject_anomaly: baseline and target shapes differ");
  }
  if (sig.duration == 0 || !(sig.magnitude > 0.0)) {
    throw DataError("inject_anomaly: duration must be >= 1 and magnitude > 0");
  }
  if (start + sig.duration > target.buckets()) {
    throw DataError("inject_anomaly: interval [" + std::to_string(start) + ", " +
                    std::to_string(start + sig.duration) + ") exceeds " + std::to_string(target.buckets()) +
                    " buckets");
  }
  for (std::size_t m : sig.metrics) {
    if (m >= target.metric_count()) throw DataError("inject_anomaly: metric index out of range");
  }
  const std::size_t end = start + sig.duration;
  switch (sig.kind) {
    case SignatureKind::level_shift:
      for (std::size_t b = start; b < end; ++b) {
        for (std::size_t m : sig.metrics) {
          for (double& v : target.samples(b, m)) v += sig.magnitude * target.scale[m];
        }
      }
      break;
    case SignatureKind::correlation_break: {
      // Affected metrics replay older values while the rest of the node
      // keeps its current phase.
      const std::size_t lag = sig.lag;
      if (lag == 0) throw DataError("inject_anomaly: correlation_break needs a positive lag");
      if (start < lag) throw DataError("inject_anomaly: correlation_break needs " + std::to_string(lag) + " buckets of history");
      for (std::size_t b = start; b < end; ++b) {
        for (std::size_t m : sig.metrics) {
          auto src = baseline.samples(b - lag, m);
          std::copy(src.begin(), src.end(), target.samples(b, m).begin());
        }
      }
      break;
    }
    case SignatureKind::temporal_disruption: {
      // Each (bucket, metric) is an i.i.d. draw from the lookback buckets before the interval.
      if (start < lookback) throw DataError("inject_anomaly: temporal_disruption needs " + std::to_string(lookback) + " buckets of history");
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::size_t> pick(start - lookback, start - 1);
      for (std::size_t b = start; b < end; ++b) {
        for (std::size_t m : sig.metrics) {
          auto src = baseline.samples(pick(rng), m);
          std::copy(src.begin(), src.end(), target.samples(b, m).begin());
        }
      }
      break;
    }
  }
}

GeneratedNode generate_node(const SynthConfig& cfg, const std::string& node_id, std::uint64_t seed) {
  cfg.validate();
  GeneratedNode node;
  node.node_id = node_id;
  node.node_seed = seed;
  const std::size_t metrics = cfg.metric_count;
  const std::size_t buckets = cfg.timestep_count;
  const std::size_t regimes = cfg.regime_count;
  auto& truth = node.truth;

  std::mt19937_64 param_rng(derive_seed(seed, "params"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthSeries series(make_metric_names(metrics), buckets, cfg.samples_per_bucket, cfg.start_time);
  truth.level.resize(metrics);
  truth.amplitude.resize(metrics);
  truth.phase.resize(metrics);
  for (std::size_t j = 0; j < metrics; ++j) {
    truth.level[j] = 10.0 + 90.0 * unit(param_rng);
    series.scale[j] = 1.0 + 9.0 * unit(param_rng);
    truth.amplitude[j] = cfg.daily_amplitude * (0.5 + unit(param_rng));
    truth.phase[j] = 2.0 * std::numbers::pi * unit(param_rng);
  }
  // Regime means live in a 2-D latent space so metrics co-vary.
  constexpr std::size_t kLatent = 2;
  nn::Matrix loading(metrics, kLatent);
  for (double& v : loading.data) v = gauss(param_rng) / std::sqrt(double(kLatent));
  truth.regime_means = nn::Matrix(regimes, metrics);
  truth.regime_volatility.resize(regimes);
  for (std::size_t r = 0; r < regimes; ++r) {
    double z[kLatent];
    for (double& v : z) v = gauss(param_rng);
    for (std::size_t j = 0; j < metrics; ++j) {
      double mu = 0.0;
      for (std::size_t k = 0; k < kLatent; ++k) mu += loading(j, k) * z[k];
      truth.regime_means(r, j) = cfg.regime_spread * mu;
    }
    truth.regime_volatility[r] =
        regimes == 1 ? 1.0 : 0.5 * std::pow(4.0, double(r) / double(regimes - 1));
  }
  // Hazard is geometric across regimes but its order is unrelated to volatility.
  truth.regime_risk.resize(regimes);
  for (std::size_t r = 0; r < regimes; ++r) {
    truth.regime_risk[r] = regimes == 1 ? 1.0 : std::pow(cfg.regime_risk, double(r) / double(regimes - 1));
  }
  std::shuffle(truth.regime_risk.begin(), truth.regime_risk.end(), param_rng);
  const double max_risk = *std::max_element(truth.regime_risk.begin(), truth.regime_risk.end());

  std::mt19937_64 regime_rng(derive_seed(seed, "regimes"));
  truth.regimes.resize(buckets);
  int current = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, regimes - 1)(regime_rng));
  for (std::size_t b = 0; b < buckets; ++b) {
    if (b > 0 && regimes > 1 && unit(regime_rng) >= cfg.regime_stay) {
      auto next = std::uniform_int_distribution<std::size_t>(0, regimes - 2)(regime_rng);
      if (next >= static_cast<std::size_t>(current)) ++next;
      current = static_cast<int>(next);
    }
    truth.regimes[b] = current;
  }

  std::mt19937_64 noise_rng(derive_seed(seed, "noise"));
  constexpr double kDay = 86400.0;
  for (std::size_t b = 0; b < buckets; ++b) {
    const auto r = static_cast<std::size_t>(truth.regimes[b]);
    const double sigma = cfg.noise_std * truth.regime_volatility[r];
    for (std::size_t j = 0; j < metrics; ++j) {
      for (std::size_t s = 0; s < cfg.samples_per_bucket; ++s) {
        const double tau = static_cast<double>(series.sample_time(b, s));
        const double daily = truth.amplitude[j] * std::sin(2.0 * std::numbers::pi * tau / kDay + truth.phase[j]);
        series.at(b, j, s) =
            truth.level[j] + series.scale[j] * (daily + truth.regime_means(r, j) + sigma * gauss(noise_rng));
      }
    }
  }
  node.baseline = series;

  // Disjoint intervals, separated by at least one normal bucket.
  std::mt19937_64 anomaly_rng(derive_seed(seed, "anomalies"));
  const auto target = static_cast<std::size_t>(std::llround(cfg.anomaly_rate * double(buckets)));
  std::size_t placed = 0;
  std::vector<char> taken(buckets, 0);
  const std::size_t earliest = std::max(cfg.lookback, cfg.correlation_lag);
  while (placed < target) {
    AnomalySignature sig;
    sig.kind = pick_kind(cfg.anomaly_mix, anomaly_rng);
    sig.duration = std::min(target - placed, std::uniform_int_distribution<std::size_t>(
                                                 cfg.min_duration, cfg.max_duration)(anomaly_rng));
    const std::size_t subset = std::max<std::size_t>(1, metrics / 4);
    switch (sig.kind) {
      case SignatureKind::level_shift:
        sig.metrics = pick_subset(metrics, subset, anomaly_rng);
        sig.magnitude = cfg.shift_min + (cfg.shift_max - cfg.shift_min) * unit(anomaly_rng);
        break;
      case SignatureKind::correlation_break:
        sig.metrics = pick_subset(metrics, subset, anomaly_rng);
        sig.lag = cfg.correlation_lag;
        break;
      case SignatureKind::temporal_disruption:
        sig.metrics.resize(metrics);
        std::iota(sig.metrics.begin(), sig.metrics.end(), std::size_t{0});
        break;
    }
    if (earliest + sig.duration > buckets) {
      throw DataError("series too short to place anomalies after the " + std::to_string(earliest) +
                      "-bucket warm-up");
    }
    bool ok = false;
    std::size_t start = 0;
    for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
      start = std::uniform_int_distribution<std::size_t>(earliest, buckets - sig.duration)(anomaly_rng);
      const double risk = truth.regime_risk[static_cast<std::size_t>(truth.regimes[start])];
      if (unit(anomaly_rng) * max_risk > risk) continue;
      const std::size_t lo = start > 0 ? start - 1 : 0;
      const std::size_t hi = std::min(buckets, start + sig.duration + 1);
      ok = std::none_of(taken.begin() + lo, taken.begin() + hi, [](char c) { return c != 0; });
    }
    if (!ok) {
      throw DataError("anomaly_rate " + std::to_string(cfg.anomaly_rate) +
                      " too high: cannot place disjoint anomaly intervals");
    }
    std::fill(taken.begin() + start, taken.begin() + start + sig.duration, 1);
    placed += sig.duration;
    truth.anomalies.push_back({start, std::move(sig)});
  }
  std::sort(truth.anomalies.begin(), truth.anomalies.end(),
            [](const InjectedAnomaly& a, const InjectedAnomaly& b) { return a.start < b.start; });

  for (std::size_t i = 0; i < truth.anomalies.size(); ++i) {
    const auto& a = truth.anomalies[i];
    inject_anomaly(node.baseline, series, a.signature, a.start, cfg.lookback, derive_seed(seed, 1000 + i));
  }
  node.series = std::move(series);

  node.labels.entries.resize(buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    node.labels.entries[b] = {cfg.start_time + static_cast<Timestamp>(b) * kBucketSeconds, taken[b] ? 1 : 0};
  }
  return node;
}

}  // namespace ruad::synth
