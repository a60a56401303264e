#pragma once

// Small deterministic neural-network engine: dense and LSTM layers,
// exact backpropagation (through time for LSTMs) and Adam.

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

namespace ruad {
class WindowSet;
}

namespace ruad::nn {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
};

enum class Activation { relu, sigmoid, linear };

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::linear;

  std::size_t input_size() const { return weights.cols; }
  std::size_t output_size() const { return weights.rows; }
};

// Gate blocks are stacked in the order input, forget, output, candidate:
// rows [k*H, (k+1)*H) of the weight matrices belong to gate k.
struct LstmLayer {
  Matrix input_weights;      // 4H x in
  Matrix recurrent_weights;  // 4H x H
  std::vector<double> bias;  // 4H
  bool return_sequence = true;

  std::size_t input_size() const { return input_weights.cols; }
  std::size_t hidden_size() const { return recurrent_weights.cols; }
};

inline constexpr std::size_t kGateInput = 0;
inline constexpr std::size_t kGateForget = 1;
inline constexpr std::size_t kGateOutput = 2;
inline constexpr std::size_t kGateCandidate = 3;

using Layer = std::variant<DenseLayer, LstmLayer>;

struct NetworkParams {
  std::vector<Layer> layers;

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t parameter_count() const;
};

// Gradients share the parameter layout.
using Gradients = NetworkParams;

struct LayerSpec {
  enum class Kind { dense, lstm } kind = Kind::dense;
  std::size_t input_size = 0;
  std::size_t output_size = 0;
  Activation activation = Activation::linear;  // dense only
  bool return_sequence = true;                 // lstm only
};

// Glorot-uniform weights, zero biases, forget-gate bias 1.
NetworkParams init_params(std::span<const LayerSpec> spec, std::uint64_t seed);

// Flat views over every parameter block, in a fixed order.
std::vector<std::span<double>> parameter_blocks(NetworkParams& params);
std::vector<std::span<const double>> parameter_blocks(const NetworkParams& params);

Gradients zeros_like(const NetworkParams& params);

struct LayerTrace {
  Matrix input;     // T x in
  Matrix output;    // T' x out (T' = 1 for a vector-returning LSTM)
  Matrix gates;     // lstm: T x 4H, post-activation
  Matrix cells;     // lstm: (T+1) x H, row 0 is the initial state
  Matrix hidden;    // lstm: (T+1) x H
  Matrix cell_tanh; // lstm: T x H
};

struct ForwardCache {
  std::vector<LayerTrace> layers;
  std::vector<double> output;  // reconstruction of the final timestep
};

// `sequence` is a row-major steps x input_size block.
std::span<const double> forward(const NetworkParams& params, std::span<const double> sequence,
                                std::size_t steps, ForwardCache& cache);

struct ForwardResult {
  std::vector<double> output;
  ForwardCache cache;
};

ForwardResult forward(const NetworkParams& params, std::span<const double> sequence,
                      std::size_t steps);

// Mean squared error of output against target.
double mse(std::span<const double> output, std::span<const double> target);

// Adds weight * dLoss/dParams into `grads` and returns the example's loss.
double accumulate_gradients(const NetworkParams& params, const ForwardCache& cache,
                            std::span<const double> target, Gradients& grads, double weight = 1.0);

Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   std::span<const double> target);

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const NetworkParams& params, double learning_rate = 1e-3);
};

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state);

struct TrainingConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 5;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // 0 = unbounded
};

void to_json(nlohmann::json& j, const TrainingConfig& cfg);
void from_json(const nlohmann::json& j, TrainingConfig& cfg);

struct TrainResult {
  NetworkParams params;  // best epoch
  std::vector<double> loss_history;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

TrainResult train_autoencoder(NetworkParams params, const WindowSet& windows,
                              const TrainingConfig& cfg);

void to_json(nlohmann::json& j, const NetworkParams& params);
void from_json(const nlohmann::json& j, NetworkParams& params);

}  // namespace ruad::nn
