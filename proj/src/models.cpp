#include "ruad/models.hpp"

#include <algorithm>
#include <charconv>

#include "ruad/error.hpp"
#include "ruad/log.hpp"
#include "ruad/seed.hpp"

namespace ruad {

std::vector<nn::LayerSpec> ModelSpec::layers() const {
  using nn::Activation;
  using Kind = nn::LayerSpec::Kind;
  if (input_dim == 0) throw ConfigError("model input dimension must be positive");
  if (kind == ModelKind::dense) {
    return {
        {Kind::dense, input_dim, encoder_width, Activation::relu, true},
        {Kind::dense, encoder_width, latent_width, Activation::relu, true},
        {Kind::dense, latent_width, encoder_width, Activation::relu, true},
        {Kind::dense, encoder_width, input_dim, Activation::sigmoid, true},
    };
  }
  if (window == 0) throw ConfigError("window length must be positive");
  return {
      {Kind::lstm, input_dim, encoder_width, Activation::linear, true},
      {Kind::lstm, encoder_width, latent_width, Activation::linear, false},
      {Kind::dense, latent_width, encoder_width, Activation::relu, true},
      {Kind::dense, encoder_width, input_dim, Activation::sigmoid, true},
  };
}

Regime regime_of(Method method) {
  switch (method) {
    case Method::exp:
      return {false, true};
    case Method::clu:
      return {false, false};
    case Method::dense_semi:
      return {true, false};
    case Method::dense_un:
      return {false, false};
    case Method::ruad_semi:
      return {true, true};
    case Method::ruad:
      break;
  }
  return {false, true};
}

std::string_view method_base_name(Method method) {
  switch (method) {
    case Method::exp:
      return "EXP";
    case Method::clu:
      return "CLU";
    case Method::dense_semi:
      return "DENSE_semi";
    case Method::dense_un:
      return "DENSE_un";
    case Method::ruad_semi:
      return "RUAD_semi";
    case Method::ruad:
      break;
  }
  return "RUAD";
}

std::optional<Method> parse_method(std::string_view base_name) {
  for (Method m : kAllMethods) {
    if (method_base_name(m) == base_name) return m;
  }
  return std::nullopt;
}

bool is_windowed(Method method) { return method == Method::ruad || method == Method::ruad_semi; }

bool needs_training(Method method) { return method != Method::exp; }

std::string MethodRun::name() const {
  std::string n(method_base_name(method));
  if (is_windowed(method)) n += "_W" + std::to_string(window);
  return n;
}

ModelSpec MethodRun::spec(std::size_t input_dim) const {
  if (method == Method::dense_semi || method == Method::dense_un) {
    return {ModelKind::dense, input_dim, 1};
  }
  if (is_windowed(method)) return {ModelKind::ruad, input_dim, window};
  throw ConfigError(name() + " is not an autoencoder method");
}

std::optional<MethodRun> parse_run_name(std::string_view name) {
  if (auto m = parse_method(name); m && !is_windowed(*m)) return MethodRun{*m, 1};
  const auto pos = name.rfind("_W");
  if (pos == std::string_view::npos) return std::nullopt;
  const auto base = parse_method(name.substr(0, pos));
  if (!base || !is_windowed(*base)) return std::nullopt;
  std::size_t window = 0;
  const auto digits = name.substr(pos + 2);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), window);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || window == 0) return std::nullopt;
  return MethodRun{*base, window};
}

void to_json(nlohmann::json& j, const TrainedModel& m) {
  j = {{"name", m.name},
       {"spec",
        {{"kind", m.spec.kind == ModelKind::dense ? "dense" : "ruad"},
         {"input_dim", m.spec.input_dim},
         {"window", m.spec.effective_window()},
         {"encoder_width", m.spec.encoder_width},
         {"latent_width", m.spec.latent_width}}},
       {"regime",
        {{"semi_supervised", m.regime.semi_supervised}, {"time_consistency", m.regime.time_consistency}}},
       {"scaler", m.scaler},
       {"max_train_error", m.max_train_error},
       {"seed", m.seed},
       {"training", m.training},
       {"train_windows", m.train_windows},
       {"loss_history", m.loss_history},
       {"network", m.network}};
}

void from_json(const nlohmann::json& j, TrainedModel& m) {
  m.name = j.at("name").get<std::string>();
  const auto& s = j.at("spec");
  const auto kind = s.at("kind").get<std::string>();
  if (kind != "dense" && kind != "ruad") throw DataError("unknown model kind '" + kind + "'");
  m.spec.kind = kind == "dense" ? ModelKind::dense : ModelKind::ruad;
  m.spec.input_dim = s.at("input_dim").get<std::size_t>();
  m.spec.window = s.at("window").get<std::size_t>();
  m.spec.encoder_width = s.value("encoder_width", std::size_t{16});
  m.spec.latent_width = s.value("latent_width", std::size_t{8});
  m.regime.semi_supervised = j.at("regime").at("semi_supervised").get<bool>();
  m.regime.time_consistency = j.at("regime").at("time_consistency").get<bool>();
  j.at("scaler").get_to(m.scaler);
  m.max_train_error = j.at("max_train_error").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  j.at("training").get_to(m.training);
  m.train_windows = j.value("train_windows", std::size_t{0});
  m.loss_history = j.value("loss_history", std::vector<double>{});
  j.at("network").get_to(m.network);
  if (!(m.max_train_error > 0.0)) throw DataError("model '" + m.name + "': max_train_error must be > 0");
  if (m.network.input_size() != m.spec.input_dim || m.scaler.size() != m.spec.input_dim) {
    throw DataError("model '" + m.name + "': network/scaler width does not match spec");
  }
}

nn::NetworkParams build_model(const ModelSpec& spec, std::uint64_t seed) {
  const auto layers = spec.layers();
  return nn::init_params(layers, seed);
}

std::vector<double> window_errors(const nn::NetworkParams& network, const WindowSet& windows) {
  std::vector<double> errors(windows.size());
  nn::ForwardCache cache;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto out = nn::forward(network, windows.sequence(i), windows.window_length(), cache);
    errors[i] = reconstruction_error(out, windows.target(i));
  }
  return errors;
}

ScoreSeries score_windows(std::string node_id, std::span<const double> errors,
                          const WindowSet& windows, double max_train_error) {
  ScoreSeries series;
  series.node_id = std::move(node_id);
  series.entries.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& e = windows.entry(i);
    const double p = anomaly_probability(normalize_error(errors[i], max_train_error));
    series.entries.push_back({e.target_bucket_start, p, e.target_label});
  }
  return series;
}

namespace {

WindowSet windows_for(const NodeDataset& scaled, std::size_t window, bool time_consistency) {
  if (time_consistency) {
    const auto segments = time_consistency_segments(scaled);
    return make_windows(segments, window);
  }
  const Segment whole = whole_dataset_segment(scaled);
  return make_windows(std::span(&whole, 1), window);
}

std::size_t longest_segment(const NodeDataset& ds) {
  std::size_t best = 0;
  for (const auto& s : time_consistency_segments(ds)) best = std::max(best, s.size());
  return best;
}

}  // namespace

TrainedModel train_node_model(const NodeDataset& dataset, const ModelSpec& spec, Regime regime,
                              const nn::TrainingConfig& cfg, double split_ratio) {
  if (spec.input_dim != dataset.feature_count()) {
    throw ConfigError("model input_dim " + std::to_string(spec.input_dim) + " != dataset width " +
                      std::to_string(dataset.feature_count()));
  }
  const std::size_t window = spec.effective_window();
  auto split = chronological_split(dataset, split_ratio);
  NodeDataset train = regime.semi_supervised ? semi_supervised_filter(split.train) : std::move(split.train);

  TrainedModel model;
  model.spec = spec;
  model.spec.window = window;
  model.regime = regime;
  model.seed = cfg.seed;
  model.training = cfg;
  model.scaler = fit_minmax(train);
  const NodeDataset scaled = apply_minmax(model.scaler, train);
  const WindowSet windows = windows_for(scaled, window, regime.time_consistency || window > 1);
  if (windows.empty()) {
    const std::string cause = regime.semi_supervised
                                  ? "semi-supervised + time-consistency filters"
                                  : "time-consistency filter";
    throw DataError("node '" + dataset.node_id + "': " + cause + " left no training window of length " +
                    std::to_string(window) + " (" + std::to_string(train.size()) +
                    " train rows, longest gap-free run " + std::to_string(longest_segment(train)) + ")");
  }

  auto trained = nn::train_autoencoder(build_model(model.spec, derive_seed(cfg.seed, "init")), windows, cfg);
  model.network = std::move(trained.params);
  model.loss_history = std::move(trained.loss_history);
  model.train_windows = windows.size();

  const auto errors = window_errors(model.network, windows);
  model.max_train_error = std::max(*std::max_element(errors.begin(), errors.end()), 1e-12);
  return model;
}

ScoreSeries score_node_model(const TrainedModel& model, const NodeDataset& test) {
  const NodeDataset scaled = apply_minmax(model.scaler, test);
  const std::size_t window = model.spec.effective_window();
  // Windowed scorers always see gap-free runs only.
  const WindowSet windows = windows_for(scaled, window, window > 1);
  if (windows.empty()) {
    log::warn("node '" + test.node_id + "': no scoreable windows for " + model.name);
    return {test.node_id, {}};
  }
  const auto errors = window_errors(model.network, windows);
  return score_windows(test.node_id, errors, windows, model.max_train_error);
}

void to_json(nlohmann::json& j, const ClusterModel& m) {
  auto sil = nlohmann::json::array();
  for (const auto& [k, s] : m.silhouettes) sil.push_back({k, s});
  j = {{"name", "CLU"}, {"kmeans", m.kmeans}, {"scaler", m.scaler}, {"silhouettes", std::move(sil)}};
}

void from_json(const nlohmann::json& j, ClusterModel& m) {
  j.at("kmeans").get_to(m.kmeans);
  j.at("scaler").get_to(m.scaler);
  m.silhouettes.clear();
  for (const auto& p : j.value("silhouettes", nlohmann::json::array())) {
    m.silhouettes.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<double>());
  }
  if (m.kmeans.centroids.cols != m.scaler.size()) throw DataError("CLU model: scaler/centroid width mismatch");
}

ClusterModel train_cluster_model(const NodeDataset& dataset, const ClusterOptions& options,
                                 double split_ratio) {
  auto split = chronological_split(dataset, split_ratio);
  ClusterModel model;
  model.scaler = fit_minmax(split.train);
  const NodeDataset scaled = apply_minmax(model.scaler, split.train);

  Matrix rows(scaled.size(), scaled.feature_count());
  std::vector<int> labels(scaled.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    std::copy(scaled.frames[i].features.begin(), scaled.frames[i].features.end(), rows.row(i).begin());
    labels[i] = scaled.label(i);
  }
  KMeansOptions km{options.restarts, 300, options.seed};
  auto selected = select_k(rows, options.k_min, options.k_max, km, options.sample_cap);
  model.silhouettes = std::move(selected.silhouettes);
  model.kmeans.k = selected.k;
  model.kmeans.seed = options.seed;
  model.kmeans.centroids = std::move(selected.fit.centroids);
  model.kmeans.cluster_anomaly_prob =
      cluster_anomaly_probabilities(selected.fit.assignment, labels, selected.k);
  return model;
}

ScoreSeries score_cluster_model(const ClusterModel& model, const NodeDataset& test) {
  const NodeDataset scaled = apply_minmax(model.scaler, test);
  ScoreSeries series;
  series.node_id = test.node_id;
  series.entries.reserve(scaled.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    series.entries.push_back(
        {scaled.frames[i].bucket_start, kmeans_score(model.kmeans, scaled.frames[i].features), scaled.label(i)});
  }
  return series;
}

ScoreSeries score_exp(const NodeDataset& dataset, ExpConfig cfg, double split_ratio) {
  const auto split = chronological_split(dataset, split_ratio);
  const auto scaler = fit_minmax(split.train);
  return exp_smoothing_scores(apply_minmax(scaler, split.test), cfg);
}

}  // namespace ruad
