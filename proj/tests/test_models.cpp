#include <doctest.h>

#include <cmath>
#include <random>

#include "ruad/error.hpp"
#include "ruad/models.hpp"
#include "ruad/synthgen.hpp"
#include "support.hpp"

using namespace ruad;

namespace {

// Smooth periodic rows with a few labelled positives and one gap.
NodeDataset wave_dataset(std::size_t rows, std::size_t features, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<Timestamp> b;
  std::vector<int> l;
  std::vector<std::vector<double>> r;
  for (std::size_t t = 0; t < rows; ++t) {
    const std::size_t slot = t < rows / 2 ? t : t + 3;
    b.push_back(static_cast<Timestamp>(slot) * 900);
    l.push_back(t % 17 == 5 ? 1 : 0);
    std::vector<double> row(features);
    for (std::size_t j = 0; j < features; ++j) row[j] = std::sin(0.3 * slot + j) + noise(rng);
    r.push_back(row);
  }
  return test::make_dataset(b, l, r);
}

nn::TrainingConfig quick(std::uint64_t seed) {
  nn::TrainingConfig c;
  c.max_epochs = 3;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("architectures") {
  ModelSpec dense{ModelKind::dense, 462, 10};
  const auto d = dense.layers();
  REQUIRE(d.size() == 4);
  CHECK(d[0].input_size == 462);
  CHECK(d[0].output_size == 16);
  CHECK(d[1].output_size == 8);
  CHECK(d[2].output_size == 16);
  CHECK(d[3].output_size == 462);
  CHECK(dense.effective_window() == 1);

  ModelSpec r{ModelKind::ruad, 462, 10};
  const auto l = r.layers();
  REQUIRE(l.size() == 4);
  CHECK(l[0].kind == nn::LayerSpec::Kind::lstm);
  CHECK(l[0].output_size == 16);
  CHECK(l[0].return_sequence);
  CHECK(l[1].kind == nn::LayerSpec::Kind::lstm);
  CHECK(l[1].output_size == 8);
  CHECK_FALSE(l[1].return_sequence);
  CHECK(l[2].output_size == 16);
  CHECK(l[2].activation == nn::Activation::relu);
  CHECK(l[3].output_size == 462);
  CHECK(l[3].activation == nn::Activation::sigmoid);

  const auto w1 = build_model({ModelKind::ruad, 5, 1}, 1);
  CHECK(w1.input_size() == 5);
  CHECK_THROWS_AS(build_model({ModelKind::ruad, 0, 3}, 1), ConfigError);
  CHECK_THROWS_AS(build_model({ModelKind::ruad, 5, 0}, 1), ConfigError);
}

TEST_CASE("method names and regimes") {
  CHECK(regime_of(Method::exp) == Regime{false, true});
  CHECK(regime_of(Method::clu) == Regime{false, false});
  CHECK(regime_of(Method::dense_semi) == Regime{true, false});
  CHECK(regime_of(Method::dense_un) == Regime{false, false});
  CHECK(regime_of(Method::ruad_semi) == Regime{true, true});
  CHECK(regime_of(Method::ruad) == Regime{false, true});

  CHECK(MethodRun{Method::ruad_semi, 20}.name() == "RUAD_semi_W20");
  CHECK(MethodRun{Method::ruad, 5}.name() == "RUAD_W5");
  CHECK(MethodRun{Method::dense_un, 1}.name() == "DENSE_un");
  for (Method m : kAllMethods) {
    for (std::size_t w : {5, 40}) {
      const MethodRun run{m, is_windowed(m) ? w : 1};
      const auto back = parse_run_name(run.name());
      REQUIRE(back.has_value());
      CHECK(back->method == m);
      CHECK(back->window == run.window);
      CHECK(regime_of(back->method) == regime_of(m));
    }
    CHECK(parse_method(method_base_name(m)) == m);
  }
  CHECK_FALSE(parse_run_name("RUAD_Wx").has_value());
  CHECK_FALSE(parse_method("LSTM").has_value());
  CHECK_FALSE(needs_training(Method::exp));
}

TEST_CASE("semi-supervised regime on clean data equals the unsupervised one") {
  auto d = wave_dataset(80, 3, 1);
  for (auto& e : d.labels.entries) e.label = 0;
  const auto a = train_node_model(d, {ModelKind::ruad, 3, 4}, {true, true}, quick(9));
  const auto b = train_node_model(d, {ModelKind::ruad, 3, 4}, {false, true}, quick(9));
  CHECK(a.loss_history == b.loss_history);
  const auto pa = nn::parameter_blocks(a.network);
  const auto pb = nn::parameter_blocks(b.network);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(std::equal(pa[i].begin(), pa[i].end(), pb[i].begin()));
  CHECK(a.max_train_error == b.max_train_error);
}

TEST_CASE("train and score a node") {
  const auto d = wave_dataset(120, 3, 2);
  const auto model = train_node_model(d, {ModelKind::ruad, 3, 5}, {false, true}, quick(4));
  CHECK(model.max_train_error > 0.0);
  CHECK(std::isfinite(model.max_train_error));

  // Train windows never exceed probability 1 and hit it at the maximum.
  const auto train = chronological_split(d, 0.8).train;
  const auto train_scores = score_node_model(model, train);
  double top = 0.0;
  for (const auto& e : train_scores.entries) {
    CHECK(e.probability <= 1.0);
    top = std::max(top, e.probability);
  }
  CHECK(top == doctest::Approx(1.0));

  const auto test_part = chronological_split(d, 0.8).test;
  const auto scores = score_node_model(model, test_part);
  CHECK(scores.entries.size() == test_part.size() - 4);

  // Labels are copied through and never influence probabilities.
  auto relabelled = test_part;
  for (auto& e : relabelled.labels.entries) e.label = 1 - e.label;
  const auto again = score_node_model(model, relabelled);
  REQUIRE(again.entries.size() == scores.entries.size());
  for (std::size_t i = 0; i < scores.entries.size(); ++i) {
    CHECK(again.entries[i].probability == scores.entries[i].probability);
    CHECK(again.entries[i].label == 1 - scores.entries[i].label);
  }

  // Too short for any window: empty scores, no throw.
  auto tiny = test_part;
  tiny.frames.resize(2);
  tiny.labels.entries.resize(2);
  CHECK(score_node_model(model, tiny).entries.empty());

  nlohmann::json j = model;
  const auto back = j.get<TrainedModel>();
  const auto s2 = score_node_model(back, test_part);
  for (std::size_t i = 0; i < scores.entries.size(); ++i) CHECK(s2.entries[i].probability == scores.entries[i].probability);
}

TEST_CASE("insufficient data names the filter") {
  const auto d = test::contiguous_dataset(3, 2, 1);
  CHECK_THROWS_AS(train_node_model(d, {ModelKind::ruad, 2, 10}, {false, true}, quick(1)), DataError);
  try {
    train_node_model(wave_dataset(40, 2, 3), {ModelKind::ruad, 2, 30}, {true, true}, quick(1));
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("semi-supervised") != std::string::npos);
  }
}

TEST_CASE("hand-evaluated scoring chain") {
  // Two features, W=2, a one-layer linear network with fixed weights.
  nn::NetworkParams net;
  nn::LstmLayer lstm;
  lstm.input_weights = nn::Matrix(4, 2, 0.0);
  lstm.recurrent_weights = nn::Matrix(4, 1, 0.0);
  lstm.bias = {0.0, 0.0, 0.0, 0.0};
  lstm.input_weights(3, 0) = 1.0;  // candidate reads feature 0
  lstm.return_sequence = false;
  net.layers.emplace_back(lstm);
  nn::DenseLayer dense;
  dense.weights = nn::Matrix(2, 1, 1.0);
  dense.bias = {0.0, 0.0};
  dense.activation = nn::Activation::linear;
  net.layers.emplace_back(dense);

  TrainedModel m;
  m.name = "RUAD_W2";
  m.spec = {ModelKind::ruad, 2, 2};
  m.network = net;
  m.scaler = {{0.0, 0.0}, {2.0, 4.0}};
  m.max_train_error = 0.5;

  const auto test = test::make_dataset({0, 900, 1800}, {0, 1, 0}, {{0.0, 0.0}, {1.0, 2.0}, {2.0, 4.0}});
  const auto s = score_node_model(m, test);
  REQUIRE(s.entries.size() == 2);

  auto sg = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  // Gates all sit at sigmoid(0) = 0.5; the candidate is tanh of the scaled feature 0.
  auto hidden = [&](double x0, double x1) {
    const double c0 = 0.5 * std::tanh(x0);
    const double c1 = 0.5 * c0 + 0.5 * std::tanh(x1);
    return sg(0.0) * std::tanh(c1);
  };
  const double h1 = hidden(0.0, 0.5);
  const double e1 = std::abs(h1 - 0.5) + std::abs(h1 - 0.5);
  const double h2 = hidden(0.5, 1.0);
  const double e2 = std::abs(h2 - 1.0) + std::abs(h2 - 1.0);
  CHECK(s.entries[0].probability == doctest::Approx(std::min(e1 / 0.5, 1.0)).epsilon(1e-12));
  CHECK(s.entries[1].probability == doctest::Approx(std::min(e2 / 0.5, 1.0)).epsilon(1e-12));
  CHECK(s.entries[0].label == 1);
  CHECK(s.entries[1].bucket_start == 1800);
}

TEST_CASE("dense and windowed paths share the scoring code") {
  const auto d = wave_dataset(60, 3, 5);
  const auto model = train_node_model(d, {ModelKind::dense, 3, 1}, {false, false}, quick(2));
  const auto test = chronological_split(d, 0.8).test;
  const auto scaled = apply_minmax(model.scaler, test);
  const Segment whole = whole_dataset_segment(scaled);
  const auto windows = make_windows(std::span(&whole, 1), 1);
  const auto manual = score_windows(test.node_id, window_errors(model.network, windows), windows, model.max_train_error);
  const auto direct = score_node_model(model, test);
  REQUIRE(manual.entries.size() == direct.entries.size());
  CHECK(direct.entries.size() == test.size());
  for (std::size_t i = 0; i < direct.entries.size(); ++i) {
    CHECK(manual.entries[i].probability == direct.entries[i].probability);
  }
}

TEST_CASE("cluster and smoothing drivers") {
  const auto d = wave_dataset(200, 2, 7);
  ClusterOptions o;
  o.k_max = 4;
  o.seed = 3;
  const auto m = train_cluster_model(d, o);
  CHECK(m.kmeans.k >= 2);
  CHECK(m.kmeans.k <= 4);
  const auto test = chronological_split(d, 0.8).test;
  const auto s = score_cluster_model(m, test);
  CHECK(s.entries.size() == test.size());
  for (const auto& e : s.entries) {
    CHECK(std::find(m.kmeans.cluster_anomaly_prob.begin(), m.kmeans.cluster_anomaly_prob.end(), e.probability) !=
          m.kmeans.cluster_anomaly_prob.end());
  }
  nlohmann::json j = m;
  CHECK(j["name"] == "CLU");
  const auto back = j.get<ClusterModel>();
  CHECK(score_cluster_model(back, test).entries.size() == s.entries.size());

  const auto e = score_exp(d, {});
  CHECK(e.entries.size() == test.size());
  for (const auto& x : e.entries) CHECK((x.probability >= 0.0 && x.probability <= 1.0));
}
