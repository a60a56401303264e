#include "ruad/runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "ruad/csv.hpp"
#include "ruad/error.hpp"
#include "ruad/log.hpp"
#include "ruad/seed.hpp"

namespace ruad {

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Writes through a temporary so an interrupted run never leaves a partial file.
void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

std::map<std::string, NodeDataset> load_datasets(const RunConfig& cfg, const std::vector<std::string>& nodes) {
  std::vector<NodeDataset> loaded(nodes.size());
  parallel_for(nodes.size(), cfg.parallelism, [&](std::size_t i) {
    loaded[i] = read_dataset_csv(cfg.data_dir / (nodes[i] + ".csv"), nodes[i]);
  });
  std::map<std::string, NodeDataset> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) out.emplace(nodes[i], std::move(loaded[i]));
  return out;
}

ClusterOptions cluster_options_for(const RunConfig& cfg, const std::string& node) {
  ClusterOptions o = cfg.clustering;
  o.seed = derive_seed(cfg.seed, node + "/CLU");
  return o;
}

}  // namespace

std::vector<MethodRun> RunConfig::runs() const {
  std::vector<MethodRun> out;
  for (Method m : kAllMethods) {
    if (std::find(methods.begin(), methods.end(), m) == methods.end()) continue;
    if (is_windowed(m)) {
      for (std::size_t w : windows) out.push_back({m, w});
    } else {
      out.push_back({m, 1});
    }
  }
  return out;
}

void RunConfig::validate() const {
  if (methods.empty()) throw ConfigError("no methods selected");
  if (windows.empty() && std::any_of(methods.begin(), methods.end(), is_windowed)) {
    throw ConfigError("RUAD methods need at least one window length");
  }
  if (std::any_of(windows.begin(), windows.end(), [](std::size_t w) { return w == 0; })) {
    throw ConfigError("window lengths must be positive");
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0,1)");
  if (!(exp.alpha > 0.0 && exp.alpha <= 1.0)) throw ConfigError("exp_alpha must lie in (0,1]");
  if (clustering.k_min < 2 || clustering.k_min > clustering.k_max) {
    throw ConfigError("clustering k range must satisfy 2 <= k_min <= k_max");
  }
  synth.validate();
}

RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base_dir) {
  RunConfig cfg;
  try {
    if (j.contains("data_dir")) {
      fs::path p = j.at("data_dir").get<std::string>();
      cfg.data_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (j.contains("nodes")) {
      const auto& n = j.at("nodes");
      if (n.is_string()) {
        if (n.get<std::string>() != "*") throw ConfigError("nodes must be \"*\" or a list of node ids");
      } else {
        n.get_to(cfg.nodes);
      }
    }
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& name : j.at("methods")) {
        const auto m = parse_method(name.get<std::string>());
        if (!m) throw ConfigError("unknown method '" + name.get<std::string>() + "'");
        if (std::find(cfg.methods.begin(), cfg.methods.end(), *m) == cfg.methods.end()) cfg.methods.push_back(*m);
      }
    }
    if (j.contains("windows")) j.at("windows").get_to(cfg.windows);
    cfg.split_ratio = j.value("split_ratio", cfg.split_ratio);
    if (j.contains("training")) j.at("training").get_to(cfg.training);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.parallelism = std::max<std::size_t>(1, j.value("parallelism", cfg.parallelism));
    cfg.exp.alpha = j.value("exp_alpha", cfg.exp.alpha);
    if (j.contains("clustering")) {
      const auto& c = j.at("clustering");
      cfg.clustering.k_min = c.value("k_min", cfg.clustering.k_min);
      cfg.clustering.k_max = c.value("k_max", cfg.clustering.k_max);
      cfg.clustering.sample_cap = c.value("silhouette_sample", cfg.clustering.sample_cap);
      cfg.clustering.restarts = c.value("restarts", cfg.clustering.restarts);
    }
    cfg.include_dummy = j.value("include_dummy", cfg.include_dummy);
    cfg.write_raw = j.value("write_raw", cfg.write_raw);
    if (j.contains("synth")) j.at("synth").get_to(cfg.synth);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

nlohmann::json to_json(const RunConfig& cfg) {
  std::vector<std::string> methods;
  for (Method m : cfg.methods) methods.emplace_back(method_base_name(m));
  nlohmann::json j = {{"data_dir", cfg.data_dir.string()},
                      {"methods", methods},
                      {"windows", cfg.windows},
                      {"split_ratio", cfg.split_ratio},
                      {"training", cfg.training},
                      {"seed", cfg.seed},
                      {"parallelism", cfg.parallelism},
                      {"exp_alpha", cfg.exp.alpha},
                      {"clustering",
                       {{"k_min", cfg.clustering.k_min},
                        {"k_max", cfg.clustering.k_max},
                        {"silhouette_sample", cfg.clustering.sample_cap},
                        {"restarts", cfg.clustering.restarts}}},
                      {"include_dummy", cfg.include_dummy},
                      {"synth", cfg.synth}};
  if (cfg.nodes.empty()) {
    j["nodes"] = "*";
  } else {
    j["nodes"] = cfg.nodes;
  }
  return j;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<std::string> list_nodes(const RunConfig& cfg) {
  if (cfg.data_dir.empty() || !fs::is_directory(cfg.data_dir)) {
    throw DataError("data directory '" + cfg.data_dir.string() + "' does not exist");
  }
  if (!cfg.nodes.empty()) {
    for (const auto& n : cfg.nodes) {
      if (!fs::exists(cfg.data_dir / (n + ".csv"))) throw DataError("no dataset for node '" + n + "'");
    }
    return cfg.nodes;
  }
  std::vector<std::string> nodes;
  for (const auto& entry : fs::directory_iterator(cfg.data_dir)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    if (name.size() > 8 && name.ends_with(".raw.csv")) continue;
    nodes.push_back(entry.path().stem().string());
  }
  std::sort(nodes.begin(), nodes.end());
  if (nodes.empty()) throw DataError("no node datasets in '" + cfg.data_dir.string() + "'");
  return nodes;
}

fs::path model_path(const fs::path& out, const std::string& node_id, const std::string& run_name) {
  return out / "models" / node_id / (run_name + ".json");
}

GenerateResult cmd_generate(const RunConfig& cfg, const fs::path& out) {
  cfg.synth.validate();
  fs::create_directories(out);
  GenerateResult result;
  for (std::size_t i = 0; i < cfg.synth.node_count; ++i) result.nodes.push_back(synth::node_name(i));

  std::vector<nlohmann::json> node_entries(result.nodes.size());
  parallel_for(result.nodes.size(), cfg.parallelism, [&](std::size_t i) {
    const auto& id = result.nodes[i];
    const auto seed = synth::node_seed(cfg.synth.seed, id);
    const auto node = synth::generate_node(cfg.synth, id, seed);
    write_dataset_csv(node.dataset(), out / (id + ".csv"));
    if (cfg.write_raw) write_raw_csv(node.series.raw_samples(), out / (id + ".raw.csv"));
    auto anomalies = nlohmann::json::array();
    for (const auto& a : node.truth.anomalies) {
      anomalies.push_back({{"kind", synth::kind_name(a.signature.kind)},
                           {"start_bucket", a.start},
                           {"bucket_start", cfg.synth.start_time + static_cast<Timestamp>(a.start) * kBucketSeconds},
                           {"duration", a.signature.duration},
                           {"magnitude", a.signature.magnitude},
                           {"lag", a.signature.lag},
                           {"metrics", a.signature.metrics}});
    }
    std::size_t positives = 0;
    for (const auto& e : node.labels.entries) positives += static_cast<std::size_t>(e.label);
    node_entries[i] = {{"node_id", id},
                       {"node_seed", seed},
                       {"anomalous_buckets", positives},
                       {"metrics", node.series.metric_names()},
                       {"anomalies", std::move(anomalies)}};
    log::info("generated " + id);
  });
  write_json(out / "manifest.json", {{"config", cfg.synth}, {"nodes", node_entries}});
  return result;
}

TrainSummary cmd_train(const RunConfig& cfg, const fs::path& out) {
  const auto nodes = list_nodes(cfg);
  const auto runs = cfg.runs();
  fs::create_directories(out);
  write_json(out / "run_config.json", to_json(cfg));

  struct Job {
    std::string node;
    MethodRun run;
  };
  std::vector<Job> jobs;
  for (const auto& node : nodes) {
    for (const auto& run : runs) {
      if (needs_training(run.method)) jobs.push_back({node, run});
    }
  }
  if (jobs.empty()) {
    log::info("no trainable methods selected; nothing to do");
    return {};
  }
  const auto datasets = load_datasets(cfg, nodes);

  enum class Status { trained, existing, data, failed };
  std::vector<Status> status(jobs.size(), Status::trained);
  std::vector<std::string> messages(jobs.size());
  parallel_for(jobs.size(), cfg.parallelism, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto name = job.run.name();
    const auto path = model_path(out, job.node, name);
    if (fs::exists(path)) {
      status[i] = Status::existing;
      return;
    }
    const auto& ds = datasets.at(job.node);
    try {
      nlohmann::json j;
      if (job.run.method == Method::clu) {
        j = train_cluster_model(ds, cluster_options_for(cfg, job.node), cfg.split_ratio);
        messages[i] = "k=" + std::to_string(j.at("kmeans").at("k").get<std::size_t>());
      } else {
        nn::TrainingConfig tc = cfg.training;
        tc.seed = derive_seed(cfg.seed, job.node + "/" + name);
        auto model = train_node_model(ds, job.run.spec(ds.feature_count()), regime_of(job.run.method), tc,
                                      cfg.split_ratio);
        model.name = name;
        std::string loss_csv = "epoch,loss\n";
        for (std::size_t e = 0; e < model.loss_history.size(); ++e) {
          loss_csv += std::to_string(e) + "," + csv::format_double(model.loss_history[e]) + "\n";
        }
        write_text_atomic(out / "models" / job.node / (name + ".loss.csv"), loss_csv);
        messages[i] = "epochs=" + std::to_string(model.loss_history.size()) +
                      " windows=" + std::to_string(model.train_windows) +
                      " max_train_error=" + csv::format_double(model.max_train_error);
        j = model;
      }
      write_json(path, j);
      log::info(job.node + " " + name + ": " + messages[i]);
    } catch (const DataError& e) {
      status[i] = Status::data;
      messages[i] = e.what();
      log::warn("skipping " + job.node + " " + name + ": " + e.what());
    } catch (const TrainingError& e) {
      status[i] = Status::failed;
      messages[i] = e.what();
      log::error(job.node + " " + name + ": " + e.what());
    }
  });

  TrainSummary summary;
  std::string log_csv = "node_id,model,status,message\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const char* s = "trained";
    switch (status[i]) {
      case Status::trained:
        ++summary.trained;
        break;
      case Status::existing:
        ++summary.skipped_existing;
        s = "existing";
        break;
      case Status::data:
        ++summary.skipped_data;
        s = "skipped";
        break;
      case Status::failed:
        summary.failures.push_back(jobs[i].node + " " + jobs[i].run.name() + ": " + messages[i]);
        s = "failed";
        break;
    }
    std::string msg = messages[i];
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    log_csv += jobs[i].node + "," + jobs[i].run.name() + "," + s + "," + msg + "\n";
  }
  write_text_atomic(out / "train_log.csv", log_csv);
  return summary;
}

namespace {

std::vector<ScoreSeries> score_run(const RunConfig& cfg, const fs::path& out, const MethodRun& run,
                                   const std::vector<std::string>& nodes,
                                   const std::map<std::string, NodeDataset>& datasets) {
  const auto name = run.name();
  std::vector<std::optional<ScoreSeries>> per_node(nodes.size());
  parallel_for(nodes.size(), cfg.parallelism, [&](std::size_t i) {
    const auto& node = nodes[i];
    const auto& ds = datasets.at(node);
    try {
      if (run.method == Method::exp) {
        per_node[i] = score_exp(ds, cfg.exp, cfg.split_ratio);
        return;
      }
      const auto path = model_path(out, node, name);
      if (!fs::exists(path)) {
        log::warn("no " + name + " model for " + node + "; node not scored");
        return;
      }
      const auto j = read_json(path);
      const auto test = chronological_split(ds, cfg.split_ratio).test;
      if (run.method == Method::clu) {
        per_node[i] = score_cluster_model(j.get<ClusterModel>(), test);
      } else {
        per_node[i] = score_node_model(j.get<TrainedModel>(), test);
      }
    } catch (const DataError& e) {
      log::warn("cannot score " + node + " " + name + ": " + e.what());
    }
  });
  std::vector<ScoreSeries> series;
  for (auto& s : per_node) {
    if (s) series.push_back(std::move(*s));
  }
  return series;
}

std::vector<ScoreSeries> dummy_series(const RunConfig& cfg, const std::vector<std::string>& nodes,
                                      const std::map<std::string, NodeDataset>& datasets) {
  std::vector<ScoreSeries> out;
  for (const auto& node : nodes) {
    const auto test = chronological_split(datasets.at(node), cfg.split_ratio).test;
    const auto scores = dummy_scores(test.size(), derive_seed(cfg.seed, node + "/DUMMY"));
    ScoreSeries s{node, {}};
    for (std::size_t i = 0; i < test.size(); ++i) {
      s.entries.push_back({test.frames[i].bucket_start, scores[i], test.label(i)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::map<std::string, std::vector<ScoreSeries>> cmd_score(const RunConfig& cfg, const fs::path& out) {
  const auto nodes = list_nodes(cfg);
  const auto datasets = load_datasets(cfg, nodes);
  std::map<std::string, std::vector<ScoreSeries>> result;
  for (const auto& run : cfg.runs()) {
    auto series = score_run(cfg, out, run, nodes, datasets);
    fs::create_directories(out / "scores");
    write_scores_csv(series, out / "scores" / (run.name() + ".csv"));
    result.emplace(run.name(), std::move(series));
  }
  if (cfg.include_dummy) {
    auto series = dummy_series(cfg, nodes, datasets);
    fs::create_directories(out / "scores");
    write_scores_csv(series, out / "scores" / "DUMMY.csv");
    result.emplace("DUMMY", std::move(series));
  }
  return result;
}

std::map<std::string, MethodSummary> cmd_evaluate(const RunConfig& cfg, const fs::path& out) {
  std::vector<std::string> names;
  for (const auto& run : cfg.runs()) names.push_back(run.name());
  if (cfg.include_dummy) names.emplace_back("DUMMY");

  std::map<std::string, std::vector<ScoreSeries>> scores;
  bool all_present = true;
  for (const auto& name : names) {
    const auto path = out / "scores" / (name + ".csv");
    if (fs::exists(path)) {
      scores.emplace(name, read_scores_csv(path));
    } else {
      all_present = false;
    }
  }
  if (!all_present) {
    for (auto& [name, series] : cmd_score(cfg, out)) {
      if (!scores.contains(name)) scores.emplace(name, std::move(series));
    }
  }

  fs::create_directories(out / "reports");
  std::map<std::string, MethodSummary> summary;
  nlohmann::json summary_json = nlohmann::json::object();
  for (const auto& name : names) {
    MethodSummary m;
    const auto& series = scores.at(name);
    for (const auto& s : series) m.nodes_scored += s.entries.empty() ? 0 : 1;
    try {
      m.roc = pool_nodes(series);
      m.ok = true;
      write_json(out / "reports" / (name + ".json"), m.roc);
      write_roc_csv(m.roc, out / "reports" / (name + "_roc.csv"));
      summary_json[name] = {{"auc", m.roc.auc},
                            {"positives", m.roc.positives},
                            {"negatives", m.roc.negatives},
                            {"nodes_scored", m.nodes_scored}};
    } catch (const DataError& e) {
      m.error = e.what();
      log::warn(name + ": " + m.error);
      summary_json[name] = {{"auc", nullptr}, {"error", m.error}, {"nodes_scored", m.nodes_scored}};
    }
    summary.emplace(name, std::move(m));
  }
  write_json(out / "summary.json", summary_json);
  return summary;
}

}  // namespace ruad
