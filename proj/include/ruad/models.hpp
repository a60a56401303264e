#pragma once

// Autoencoder architectures, the method/regime matrix and per-node
// train/score drivers for every evaluated method.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ruad/baselines.hpp"
#include "ruad/nn.hpp"
#include "ruad/pipeline.hpp"
#include "ruad/scoring.hpp"

namespace ruad {

enum class ModelKind { dense, ruad };

struct ModelSpec {
  ModelKind kind = ModelKind::dense;
  std::size_t input_dim = 0;
  std::size_t window = 1;  // forced to 1 for dense
  std::size_t encoder_width = 16;
  std::size_t latent_width = 8;

  // dense: N -> 16 -> 8 -> 16 -> N
  // ruad:  LSTM(N -> 16, sequence) -> LSTM(16 -> 8, last state) -> 16 -> N
  std::vector<nn::LayerSpec> layers() const;
  std::size_t effective_window() const { return kind == ModelKind::dense ? 1 : window; }
};

struct Regime {
  bool semi_supervised = false;
  bool time_consistency = false;

  bool operator==(const Regime&) const = default;
};

enum class Method { exp, clu, dense_semi, dense_un, ruad_semi, ruad };

inline constexpr Method kAllMethods[] = {Method::exp,      Method::clu,       Method::dense_semi,
                                         Method::dense_un, Method::ruad_semi, Method::ruad};

Regime regime_of(Method method);
std::string_view method_base_name(Method method);
std::optional<Method> parse_method(std::string_view base_name);
bool is_windowed(Method method);
bool needs_training(Method method);

// One entry of the evaluation matrix; window is only meaningful for RUAD variants.
struct MethodRun {
  Method method = Method::exp;
  std::size_t window = 1;

  std::string name() const;  // EXP, CLU, DENSE_semi, DENSE_un, RUAD_semi_W<k>, RUAD_W<k>
  ModelSpec spec(std::size_t input_dim) const;
};

std::optional<MethodRun> parse_run_name(std::string_view name);

struct TrainedModel {
  std::string name;
  ModelSpec spec;
  Regime regime;
  nn::NetworkParams network;
  ScalerParams scaler;
  double max_train_error = 1e-12;
  std::uint64_t seed = 0;
  nn::TrainingConfig training;
  std::vector<double> loss_history;
  std::size_t train_windows = 0;
};

void to_json(nlohmann::json& j, const TrainedModel& m);
void from_json(const nlohmann::json& j, TrainedModel& m);

nn::NetworkParams build_model(const ModelSpec& spec, std::uint64_t seed);

TrainedModel train_node_model(const NodeDataset& dataset, const ModelSpec& spec, Regime regime,
                              const nn::TrainingConfig& cfg, double split_ratio = 0.8);

// Scores the test portion; labels are copied through, never read.
ScoreSeries score_node_model(const TrainedModel& model, const NodeDataset& test);

// Shared by the dense and recurrent paths.
std::vector<double> window_errors(const nn::NetworkParams& network, const WindowSet& windows);
ScoreSeries score_windows(std::string node_id, std::span<const double> errors,
                          const WindowSet& windows, double max_train_error);

struct ClusterOptions {
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::size_t sample_cap = 2000;
  std::size_t restarts = 10;
  std::uint64_t seed = 0;
};

struct ClusterModel {
  KMeansModel kmeans;
  ScalerParams scaler;
  std::vector<std::pair<std::size_t, double>> silhouettes;
};

void to_json(nlohmann::json& j, const ClusterModel& m);
void from_json(const nlohmann::json& j, ClusterModel& m);

// The only trainer that reads train labels in an unsupervised regime.
ClusterModel train_cluster_model(const NodeDataset& dataset, const ClusterOptions& options,
                                 double split_ratio = 0.8);
ScoreSeries score_cluster_model(const ClusterModel& model, const NodeDataset& test);

// Fits the scaler on the train split and smooths the scaled test split.
ScoreSeries score_exp(const NodeDataset& dataset, ExpConfig cfg, double split_ratio = 0.8);

}  // namespace ruad
