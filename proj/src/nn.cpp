#include "ruad/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ruad/error.hpp"
#include "ruad/pipeline.hpp"

namespace ruad::nn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::linear:
      break;
  }
  return x;
}

// Derivative expressed through the activation's output.
inline double activation_slope(Activation a, double y) {
  switch (a) {
    case Activation::relu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid:
      return y * (1.0 - y);
    case Activation::linear:
      break;
  }
  return 1.0;
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::linear:
      break;
  }
  return "linear";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "linear") return Activation::linear;
  throw DataError("unknown activation '" + s + "'");
}

std::size_t layer_input(const Layer& l) {
  return std::visit([](const auto& x) { return x.input_size(); }, l);
}

std::size_t layer_output(const Layer& l) {
  return std::visit(Overloaded{[](const DenseLayer& d) { return d.output_size(); },
                               [](const LstmLayer& s) { return s.hidden_size(); }},
                    l);
}

void forward_dense(const DenseLayer& layer, LayerTrace& trace) {
  const std::size_t steps = trace.input.rows;
  const std::size_t in = layer.input_size();
  const std::size_t out = layer.output_size();
  trace.output.resize(steps, out);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* x = trace.input.data.data() + t * in;
    double* y = trace.output.data.data() + t * out;
    for (std::size_t o = 0; o < out; ++o) {
      y[o] = activate(layer.activation, layer.bias[o] + dot(layer.weights.data.data() + o * in, x, in));
    }
  }
}

void forward_lstm(const LstmLayer& layer, LayerTrace& trace) {
  const std::size_t steps = trace.input.rows;
  const std::size_t in = layer.input_size();
  const std::size_t h = layer.hidden_size();
  trace.gates.resize(steps, 4 * h);
  trace.cells.resize(steps + 1, h);
  trace.hidden.resize(steps + 1, h);
  trace.cell_tanh.resize(steps, h);
  const double* wx = layer.input_weights.data.data();
  const double* wh = layer.recurrent_weights.data.data();
  for (std::size_t t = 0; t < steps; ++t) {
    const double* x = trace.input.data.data() + t * in;
    const double* h_prev = trace.hidden.data.data() + t * h;
    const double* c_prev = trace.cells.data.data() + t * h;
    double* gate = trace.gates.data.data() + t * 4 * h;
    for (std::size_t r = 0; r < 4 * h; ++r) {
      gate[r] = layer.bias[r] + dot(wx + r * in, x, in) + dot(wh + r * h, h_prev, h);
    }
    for (std::size_t r = 0; r < 3 * h; ++r) gate[r] = sigmoid(gate[r]);
    for (std::size_t r = 3 * h; r < 4 * h; ++r) gate[r] = std::tanh(gate[r]);
    double* c = trace.cells.data.data() + (t + 1) * h;
    double* hid = trace.hidden.data.data() + (t + 1) * h;
    double* tc = trace.cell_tanh.data.data() + t * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double i_g = gate[kGateInput * h + j];
      const double f_g = gate[kGateForget * h + j];
      const double o_g = gate[kGateOutput * h + j];
      const double g_g = gate[kGateCandidate * h + j];
      c[j] = f_g * c_prev[j] + i_g * g_g;
      tc[j] = std::tanh(c[j]);
      hid[j] = o_g * tc[j];
    }
  }
  if (layer.return_sequence) {
    trace.output.rows = steps;
    trace.output.cols = h;
    trace.output.data.assign(trace.hidden.data.begin() + h, trace.hidden.data.end());
  } else {
    trace.output.rows = 1;
    trace.output.cols = h;
    trace.output.data.assign(trace.hidden.data.end() - h, trace.hidden.data.end());
  }
}

// d_out has the shape of trace.output; d_in (if non-null) receives T x in.
void backward_dense(const DenseLayer& layer, const LayerTrace& trace, Matrix& d_out,
                    DenseLayer& grad, Matrix* d_in) {
  const std::size_t steps = trace.input.rows;
  const std::size_t in = layer.input_size();
  const std::size_t out = layer.output_size();
  if (d_in) d_in->resize(steps, in);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* x = trace.input.data.data() + t * in;
    const double* y = trace.output.data.data() + t * out;
    double* dz = d_out.data.data() + t * out;
    for (std::size_t o = 0; o < out; ++o) {
      dz[o] *= activation_slope(layer.activation, y[o]);
      if (dz[o] == 0.0) continue;
      axpy(dz[o], x, grad.weights.data.data() + o * in, in);
      grad.bias[o] += dz[o];
      if (d_in) axpy(dz[o], layer.weights.data.data() + o * in, d_in->data.data() + t * in, in);
    }
  }
}

void backward_lstm(const LstmLayer& layer, const LayerTrace& trace, const Matrix& d_out,
                   LstmLayer& grad, Matrix* d_in) {
  const std::size_t steps = trace.input.rows;
  const std::size_t in = layer.input_size();
  const std::size_t h = layer.hidden_size();
  if (d_in) d_in->resize(steps, in);
  std::vector<double> dh_next(h, 0.0);
  std::vector<double> dc_next(h, 0.0);
  std::vector<double> da(4 * h, 0.0);
  const double* wx = layer.input_weights.data.data();
  const double* wh = layer.recurrent_weights.data.data();
  double* gwx = grad.input_weights.data.data();
  double* gwh = grad.recurrent_weights.data.data();

  for (std::size_t tt = steps; tt-- > 0;) {
    const double* gate = trace.gates.data.data() + tt * 4 * h;
    const double* c_prev = trace.cells.data.data() + tt * h;
    const double* h_prev = trace.hidden.data.data() + tt * h;
    const double* tc = trace.cell_tanh.data.data() + tt * h;
    const double* x = trace.input.data.data() + tt * in;
    const double* d_out_row = nullptr;
    if (layer.return_sequence) {
      d_out_row = d_out.data.data() + tt * h;
    } else if (tt == steps - 1) {
      d_out_row = d_out.data.data();
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double dh = dh_next[j] + (d_out_row ? d_out_row[j] : 0.0);
      const double i_g = gate[kGateInput * h + j];
      const double f_g = gate[kGateForget * h + j];
      const double o_g = gate[kGateOutput * h + j];
      const double g_g = gate[kGateCandidate * h + j];
      const double d_o = dh * tc[j];
      const double dc = dc_next[j] + dh * o_g * (1.0 - tc[j] * tc[j]);
      da[kGateInput * h + j] = dc * g_g * i_g * (1.0 - i_g);
      da[kGateForget * h + j] = dc * c_prev[j] * f_g * (1.0 - f_g);
      da[kGateOutput * h + j] = d_o * o_g * (1.0 - o_g);
      da[kGateCandidate * h + j] = dc * i_g * (1.0 - g_g * g_g);
      dc_next[j] = dc * f_g;
    }
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    double* dx = d_in ? d_in->data.data() + tt * in : nullptr;
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double a = da[r];
      if (a == 0.0) continue;
      axpy(a, x, gwx + r * in, in);
      axpy(a, h_prev, gwh + r * h, h);
      grad.bias[r] += a;
      axpy(a, wh + r * h, dh_next.data(), h);
      if (dx) axpy(a, wx + r * in, dx, in);
    }
  }
}

void fill_uniform(std::span<double> values, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : values) v = dist(rng);
}

}  // namespace

std::size_t NetworkParams::input_size() const {
  return layers.empty() ? 0 : layer_input(layers.front());
}

std::size_t NetworkParams::output_size() const {
  return layers.empty() ? 0 : layer_output(layers.back());
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (auto block : parameter_blocks(*this)) n += block.size();
  return n;
}

NetworkParams init_params(std::span<const LayerSpec> spec, std::uint64_t seed) {
  if (spec.empty()) throw ConfigError("network needs at least one layer");
  std::mt19937_64 rng(seed);
  NetworkParams params;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const auto& s = spec[k];
    if (s.input_size == 0 || s.output_size == 0) {
      throw ConfigError("layer " + std::to_string(k) + " has zero width");
    }
    if (k > 0 && s.input_size != spec[k - 1].output_size) {
      throw ConfigError("layer " + std::to_string(k) + " expects " + std::to_string(s.input_size) +
                        " inputs but previous layer emits " + std::to_string(spec[k - 1].output_size));
    }
    if (s.kind == LayerSpec::Kind::dense) {
      DenseLayer d;
      d.weights = Matrix(s.output_size, s.input_size);
      d.bias.assign(s.output_size, 0.0);
      d.activation = s.activation;
      fill_uniform(d.weights.data, std::sqrt(6.0 / double(s.input_size + s.output_size)), rng);
      params.layers.emplace_back(std::move(d));
    } else {
      const std::size_t h = s.output_size;
      LstmLayer l;
      l.input_weights = Matrix(4 * h, s.input_size);
      l.recurrent_weights = Matrix(4 * h, h);
      l.bias.assign(4 * h, 0.0);
      l.return_sequence = s.return_sequence;
      // Per-gate fan: each gate block is an H x in (or H x H) matrix.
      fill_uniform(l.input_weights.data, std::sqrt(6.0 / double(s.input_size + h)), rng);
      fill_uniform(l.recurrent_weights.data, std::sqrt(6.0 / double(2 * h)), rng);
      std::fill(l.bias.begin() + kGateForget * h, l.bias.begin() + (kGateForget + 1) * h, 1.0);
      params.layers.emplace_back(std::move(l));
    }
  }
  return params;
}

std::vector<std::span<double>> parameter_blocks(NetworkParams& params) {
  std::vector<std::span<double>> blocks;
  for (auto& layer : params.layers) {
    std::visit(Overloaded{[&](DenseLayer& d) {
                            blocks.emplace_back(d.weights.data);
                            blocks.emplace_back(d.bias);
                          },
                          [&](LstmLayer& l) {
                            blocks.emplace_back(l.input_weights.data);
                            blocks.emplace_back(l.recurrent_weights.data);
                            blocks.emplace_back(l.bias);
                          }},
               layer);
  }
  return blocks;
}

std::vector<std::span<const double>> parameter_blocks(const NetworkParams& params) {
  auto blocks = parameter_blocks(const_cast<NetworkParams&>(params));
  return {blocks.begin(), blocks.end()};
}

Gradients zeros_like(const NetworkParams& params) {
  Gradients g = params;
  for (auto block : parameter_blocks(g)) std::fill(block.begin(), block.end(), 0.0);
  return g;
}

std::span<const double> forward(const NetworkParams& params, std::span<const double> sequence,
                                std::size_t steps, ForwardCache& cache) {
  const std::size_t in = params.input_size();
  if (params.layers.empty()) throw ConfigError("forward on an empty network");
  if (steps == 0 || sequence.size() != steps * in) {
    throw DataError("forward: expected " + std::to_string(steps) + " x " + std::to_string(in) +
                    " input, got " + std::to_string(sequence.size()) + " values");
  }
  cache.layers.resize(params.layers.size());
  auto& first = cache.layers.front().input;
  first.rows = steps;
  first.cols = in;
  first.data.assign(sequence.begin(), sequence.end());
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto& trace = cache.layers[k];
    if (k > 0) {
      const auto& prev = cache.layers[k - 1].output;
      trace.input.rows = prev.rows;
      trace.input.cols = prev.cols;
      trace.input.data = prev.data;
    }
    std::visit(Overloaded{[&](const DenseLayer& d) { forward_dense(d, trace); },
                          [&](const LstmLayer& l) { forward_lstm(l, trace); }},
               params.layers[k]);
  }
  const auto& last = cache.layers.back().output;
  cache.output.assign(last.data.end() - last.cols, last.data.end());
  return cache.output;
}

ForwardResult forward(const NetworkParams& params, std::span<const double> sequence,
                      std::size_t steps) {
  ForwardResult r;
  forward(params, sequence, steps, r.cache);
  r.output = r.cache.output;
  return r;
}

double mse(std::span<const double> output, std::span<const double> target) {
  if (output.size() != target.size() || output.empty()) throw DataError("mse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double d = output[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(output.size());
}

double accumulate_gradients(const NetworkParams& params, const ForwardCache& cache,
                            std::span<const double> target, Gradients& grads, double weight) {
  const double loss = mse(cache.output, target);
  const std::size_t n = target.size();
  const auto& last_out = cache.layers.back().output;
  Matrix d_out(last_out.rows, last_out.cols);
  double* d_last = d_out.data.data() + (last_out.rows - 1) * last_out.cols;
  for (std::size_t i = 0; i < n; ++i) {
    d_last[i] = weight * 2.0 * (cache.output[i] - target[i]) / static_cast<double>(n);
  }
  Matrix d_in;
  for (std::size_t k = params.layers.size(); k-- > 0;) {
    Matrix* d_in_ptr = k > 0 ? &d_in : nullptr;
    std::visit(Overloaded{[&](const DenseLayer& d) {
                            backward_dense(d, cache.layers[k], d_out,
                                           std::get<DenseLayer>(grads.layers[k]), d_in_ptr);
                          },
                          [&](const LstmLayer& l) {
                            backward_lstm(l, cache.layers[k], d_out,
                                          std::get<LstmLayer>(grads.layers[k]), d_in_ptr);
                          }},
               params.layers[k]);
    if (k > 0) std::swap(d_out, d_in);
  }
  return loss;
}

Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   std::span<const double> target) {
  Gradients g = zeros_like(params);
  accumulate_gradients(params, cache, target, g, 1.0);
  return g;
}

AdamState AdamState::for_params(const NetworkParams& params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (auto block : parameter_blocks(params)) {
    s.first_moment.emplace_back(block.size(), 0.0);
    s.second_moment.emplace_back(block.size(), 0.0);
  }
  return s;
}

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state) {
  auto p_blocks = parameter_blocks(params);
  auto g_blocks = parameter_blocks(grads);
  if (state.first_moment.empty()) {
    const double lr = state.learning_rate;
    const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;
    const auto step = state.step;
    state = AdamState::for_params(params, lr);
    state.beta1 = b1;
    state.beta2 = b2;
    state.epsilon = eps;
    state.step = step;
  }
  if (p_blocks.size() != g_blocks.size() || p_blocks.size() != state.first_moment.size()) {
    throw DataError("adam: parameter/gradient layout mismatch");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < p_blocks.size(); ++b) {
    auto p = p_blocks[b];
    auto g = g_blocks[b];
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    if (p.size() != g.size() || p.size() != m.size()) throw DataError("adam: block size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void to_json(nlohmann::json& j, const TrainingConfig& cfg) {
  j = {{"learning_rate", cfg.learning_rate},
       {"batch_size", cfg.batch_size},
       {"max_epochs", cfg.max_epochs},
       {"early_stop_patience", cfg.early_stop_patience},
       {"seed", cfg.seed},
       {"max_steps", cfg.max_steps},
       {"loss", "mse"},
       {"optimizer", {{"name", "adam"}, {"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}}}};
}

void from_json(const nlohmann::json& j, TrainingConfig& cfg) {
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
  cfg.early_stop_patience = j.value("early_stop_patience", cfg.early_stop_patience);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.max_steps = j.value("max_steps", cfg.max_steps);
  if (j.contains("loss") && j.at("loss") != "mse") throw ConfigError("only the mse loss is supported");
  if (!(cfg.learning_rate >= 0.0) || cfg.batch_size == 0 || cfg.max_epochs == 0 ||
      cfg.early_stop_patience == 0) {
    throw ConfigError("training config: learning_rate >= 0 and positive batch/epochs/patience required");
  }
}

TrainResult train_autoencoder(NetworkParams params, const WindowSet& windows,
                              const TrainingConfig& cfg) {
  if (windows.empty()) throw TrainingError("no training windows");
  if (params.input_size() != windows.feature_count() ||
      params.output_size() != windows.feature_count()) {
    throw TrainingError("network width does not match window feature count");
  }
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");

  std::mt19937_64 rng(cfg.seed);
  AdamState adam = AdamState::for_params(params, cfg.learning_rate);
  Gradients grads = zeros_like(params);
  auto grad_blocks = parameter_blocks(grads);
  ForwardCache cache;

  const std::size_t n = windows.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> window_loss(n, 0.0);
  std::vector<char> visited(n, 0);

  TrainResult result;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  double last_improvement = best;
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::fill(visited.begin(), visited.end(), 0);
    bool out_of_steps = false;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      for (auto block : grad_blocks) std::fill(block.begin(), block.end(), 0.0);
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t idx = order[b];
        forward(params, windows.sequence(idx), windows.window_length(), cache);
        window_loss[idx] = accumulate_gradients(params, cache, windows.target(idx), grads, weight);
        visited[idx] = 1;
      }
      adam_step(params, grads, adam);
      result.steps += 1;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        out_of_steps = true;
        break;
      }
    }

    // Summed in window order so the value does not depend on the shuffle.
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!visited[i]) continue;
      total += window_loss[i];
      ++count;
    }
    const double loss = total / static_cast<double>(count);
    if (!std::isfinite(loss)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                          std::to_string(loss) + ")");
    }
    result.loss_history.push_back(loss);
    if (loss < best) {
      best = loss;
      result.params = params;
      result.best_epoch = epoch;
    }
    if (loss < last_improvement - 1e-6) {
      last_improvement = loss;
      stale = 0;
    } else if (++stale >= cfg.early_stop_patience) {
      break;
    }
    if (out_of_steps) break;
  }
  return result;
}

void to_json(nlohmann::json& j, const NetworkParams& params) {
  auto layers = nlohmann::json::array();
  for (const auto& layer : params.layers) {
    std::visit(Overloaded{[&](const DenseLayer& d) {
                            layers.push_back({{"type", "dense"},
                                              {"input_size", d.input_size()},
                                              {"output_size", d.output_size()},
                                              {"activation", activation_name(d.activation)},
                                              {"weights", d.weights.data},
                                              {"bias", d.bias}});
                          },
                          [&](const LstmLayer& l) {
                            layers.push_back({{"type", "lstm"},
                                              {"input_size", l.input_size()},
                                              {"hidden_size", l.hidden_size()},
                                              {"return_sequence", l.return_sequence},
                                              {"gate_order", {"input", "forget", "output", "candidate"}},
                                              {"input_weights", l.input_weights.data},
                                              {"recurrent_weights", l.recurrent_weights.data},
                                              {"bias", l.bias}});
                          }},
               layer);
  }
  j = {{"layers", std::move(layers)}};
}

void from_json(const nlohmann::json& j, NetworkParams& params) {
  params.layers.clear();
  for (const auto& lj : j.at("layers")) {
    const auto type = lj.at("type").get<std::string>();
    if (type == "dense") {
      DenseLayer d;
      const auto in = lj.at("input_size").get<std::size_t>();
      const auto out = lj.at("output_size").get<std::size_t>();
      d.weights.rows = out;
      d.weights.cols = in;
      lj.at("weights").get_to(d.weights.data);
      lj.at("bias").get_to(d.bias);
      d.activation = parse_activation(lj.at("activation").get<std::string>());
      if (d.weights.data.size() != in * out || d.bias.size() != out) {
        throw DataError("dense layer shape mismatch in serialized network");
      }
      params.layers.emplace_back(std::move(d));
    } else if (type == "lstm") {
      LstmLayer l;
      const auto in = lj.at("input_size").get<std::size_t>();
      const auto h = lj.at("hidden_size").get<std::size_t>();
      l.input_weights.rows = 4 * h;
      l.input_weights.cols = in;
      l.recurrent_weights.rows = 4 * h;
      l.recurrent_weights.cols = h;
      lj.at("input_weights").get_to(l.input_weights.data);
      lj.at("recurrent_weights").get_to(l.recurrent_weights.data);
      lj.at("bias").get_to(l.bias);
      l.return_sequence = lj.at("return_sequence").get<bool>();
      if (l.input_weights.data.size() != 4 * h * in || l.recurrent_weights.data.size() != 4 * h * h ||
          l.bias.size() != 4 * h) {
        throw DataError("lstm layer shape mismatch in serialized network");
      }
      params.layers.emplace_back(std::move(l));
    } else {
      throw DataError("unknown layer type '" + type + "'");
    }
  }
}

}  // namespace ruad::nn
