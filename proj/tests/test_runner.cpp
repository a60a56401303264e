#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ruad/error.hpp"
#include "ruad/runner.hpp"

using namespace ruad;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ruad_runner_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig tiny_config(const fs::path& data) {
  RunConfig cfg;
  cfg.data_dir = data;
  cfg.synth.node_count = 2;
  cfg.synth.metric_count = 3;
  cfg.synth.timestep_count = 700;
  cfg.synth.anomaly_rate = 0.03;
  cfg.training.max_epochs = 1;
  cfg.clustering.k_max = 3;
  cfg.clustering.restarts = 2;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(RUAD_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("run config parsing") {
  const auto j = nlohmann::json::parse(R"({"data_dir": "data", "methods": ["RUAD", "EXP"], "windows": [10],
                                           "seed": 7, "training": {"max_epochs": 3}})");
  const auto cfg = parse_run_config(j, "/base");
  CHECK(cfg.data_dir == fs::path("/base/data"));
  CHECK(cfg.seed == 7);
  CHECK(cfg.training.max_epochs == 3);
  const auto runs = cfg.runs();
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].name() == "EXP");
  CHECK(runs[1].name() == "RUAD_W10");

  CHECK(RunConfig{}.runs().size() == 12);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(R"({"methods": ["LSTM"]})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(R"({"split_ratio": 1.5})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(R"({"windows": [0]})")), ConfigError);
}

TEST_CASE("parallel_for runs every index and rethrows") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw DataError("x"); }), DataError);
}

TEST_CASE("generate, train, score, evaluate") {
  const auto root = fresh_dir("e2e");
  auto cfg = tiny_config(root / "data");
  const auto gen = cmd_generate(cfg, root / "data");
  CHECK(gen.nodes.size() == 2);
  CHECK(fs::exists(root / "data" / "manifest.json"));
  const auto first = slurp(root / "data" / "node000.csv");
  cmd_generate(cfg, root / "data");
  CHECK(slurp(root / "data" / "node000.csv") == first);
  CHECK(list_nodes(cfg) == std::vector<std::string>{"node000", "node001"});

  SUBCASE("EXP needs no models") {
    cfg.methods = {Method::exp};
    const auto s = cmd_train(cfg, root / "exp");
    CHECK(s.trained == 0);
    CHECK(fs::exists(root / "exp" / "run_config.json"));
    CHECK_FALSE(fs::exists(root / "exp" / "models"));
  }

  SUBCASE("model store is idempotent") {
    cfg.methods = {Method::ruad};
    cfg.windows = {10};
    const auto out = root / "ruad";
    auto s = cmd_train(cfg, out);
    CHECK(s.trained == 2);
    CHECK(fs::exists(model_path(out, "node000", "RUAD_W10")));
    CHECK(fs::exists(model_path(out, "node001", "RUAD_W10")));
    const auto before = slurp(model_path(out, "node001", "RUAD_W10"));
    fs::remove(model_path(out, "node000", "RUAD_W10"));
    s = cmd_train(cfg, out);
    CHECK(s.trained == 1);
    CHECK(s.skipped_existing == 1);
    CHECK(slurp(model_path(out, "node001", "RUAD_W10")) == before);
  }

  SUBCASE("every requested method appears once in the summary") {
    cfg.methods = {Method::exp, Method::clu, Method::dense_un, Method::ruad_semi};
    cfg.windows = {5};
    cfg.include_dummy = true;
    const auto out = root / "all";
    cmd_train(cfg, out);
    const auto summary = cmd_evaluate(cfg, out);
    const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(j.size() == 5);
    for (const auto* name : {"EXP", "CLU", "DENSE_un", "RUAD_semi_W5", "DUMMY"}) {
      REQUIRE(j.contains(name));
      CHECK(j[name]["nodes_scored"] == 2);
      CHECK(summary.at(name).ok);
      CHECK(fs::exists(out / "reports" / (std::string(name) + "_roc.csv")));
    }
  }
}

TEST_CASE("evaluate from score files") {
  const auto root = fresh_dir("scores");
  auto cfg = tiny_config(root / "data");
  cmd_generate(cfg, root / "data");
  cfg.methods = {Method::exp, Method::clu};
  const auto out = root / "out";
  fs::create_directories(out / "scores");

  // A perfect oracle and a single-class method.
  std::ofstream(out / "scores" / "EXP.csv") << "node_id,bucket_start,probability,label\n"
                                            << "a,0,0.9,1\na,900,0.1,0\nb,0,0.8,1\nb,900,0.3,0\n";
  std::ofstream(out / "scores" / "CLU.csv") << "node_id,bucket_start,probability,label\na,0,0.2,0\na,900,0.1,0\n";
  const auto s = cmd_evaluate(cfg, out);
  CHECK(s.at("EXP").ok);
  CHECK(s.at("EXP").roc.auc == 1.0);
  CHECK_FALSE(s.at("CLU").ok);
  const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(j["EXP"]["auc"] == 1.0);
  CHECK(j["CLU"]["auc"].is_null());
  CHECK(j["CLU"]["error"].get<std::string>().find("positive") != std::string::npos);
}

TEST_CASE("command line exit codes") {
  const auto root = fresh_dir("cli");
  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  std::ofstream(root / "bad.json") << R"({"synth": {"anomaly_rate": 1.5}})";
  CHECK(run_cli("generate --config " + (root / "bad.json").string() + " --out " + (root / "g").string()) == 1);
  std::ofstream(root / "missing.json") << R"({"data_dir": "nowhere"})";
  CHECK(run_cli("train --config " + (root / "missing.json").string() + " --out " + (root / "t").string()) == 2);
  std::ofstream(root / "ok.json") << R"({"synth": {"node_count": 1, "metric_count": 2, "timestep_count": 300}})";
  CHECK(run_cli("generate --config " + (root / "ok.json").string() + " --out " + (root / "g").string()) == 0);
  CHECK(fs::exists(root / "g" / "node000.csv"));
}
