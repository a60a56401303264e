#pragma once

// Batch driver behind the command-line tool: dataset generation, the
// per-node training matrix, scoring and pooled evaluation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruad/models.hpp"
#include "ruad/nn.hpp"
#include "ruad/scoring.hpp"
#include "ruad/synthgen.hpp"

namespace ruad {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path data_dir;
  std::vector<std::string> nodes;  // empty: every <node>.csv in data_dir
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  std::vector<std::size_t> windows{5, 10, 20, 40};
  double split_ratio = 0.8;
  nn::TrainingConfig training;
  std::uint64_t seed = 42;
  std::size_t parallelism = 1;
  ExpConfig exp;
  ClusterOptions clustering;
  bool include_dummy = false;
  bool write_raw = false;
  synth::SynthConfig synth;

  // Expands methods x windows into the evaluation matrix, in a fixed order.
  std::vector<MethodRun> runs() const;
  void validate() const;
};

// Relative data_dir entries resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base_dir = {});
RunConfig load_run_config(const fs::path& path);
nlohmann::json to_json(const RunConfig& cfg);

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// thrown by any job is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

std::vector<std::string> list_nodes(const RunConfig& cfg);

fs::path model_path(const fs::path& out, const std::string& node_id, const std::string& run_name);

struct GenerateResult {
  std::vector<std::string> nodes;
};

GenerateResult cmd_generate(const RunConfig& cfg, const fs::path& out);

struct TrainSummary {
  std::size_t trained = 0;
  std::size_t skipped_existing = 0;
  std::size_t skipped_data = 0;  // insufficient data; logged
  std::vector<std::string> failures;  // training errors
};

TrainSummary cmd_train(const RunConfig& cfg, const fs::path& out);

// Scores every node's test split for each run; writes scores/<name>.csv.
std::map<std::string, std::vector<ScoreSeries>> cmd_score(const RunConfig& cfg, const fs::path& out);

struct MethodSummary {
  bool ok = false;
  RocReport roc;
  std::size_t nodes_scored = 0;
  std::string error;
};

// Pools scores per run (reusing score files when present) and writes
// reports/<name>.json, reports/<name>_roc.csv and summary.json.
std::map<std::string, MethodSummary> cmd_evaluate(const RunConfig& cfg, const fs::path& out);

}  // namespace ruad
