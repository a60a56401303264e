#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ruad/error.hpp"
#include "ruad/log.hpp"
#include "ruad/runner.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::size_t jobs = 0;
  bool verbose = false;
  bool quiet = false;
};

ruad::RunConfig resolve(const Options& o) {
  ruad::RunConfig cfg = o.config.empty() ? ruad::RunConfig{} : ruad::load_run_config(o.config);
  if (!o.data.empty()) cfg.data_dir = o.data;
  if (o.jobs > 0) cfg.parallelism = o.jobs;
  return cfg;
}

int run_generate(const Options& o) {
  const auto cfg = resolve(o);
  const auto result = ruad::cmd_generate(cfg, o.out);
  std::printf("wrote %zu node datasets to %s\n", result.nodes.size(), o.out.c_str());
  return 0;
}

int run_train(const Options& o) {
  auto cfg = resolve(o);
  if (cfg.data_dir.empty()) throw ruad::ConfigError("no data directory (set data_dir or pass --data)");
  const auto s = ruad::cmd_train(cfg, o.out);
  std::printf("trained %zu, already present %zu, skipped for data %zu, failed %zu\n", s.trained,
              s.skipped_existing, s.skipped_data, s.failures.size());
  for (const auto& f : s.failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
  return s.failures.empty() ? 0 : static_cast<int>(ruad::ErrorKind::training);
}

int run_score(const Options& o) {
  auto cfg = resolve(o);
  if (cfg.data_dir.empty()) throw ruad::ConfigError("no data directory (set data_dir or pass --data)");
  const auto scores = ruad::cmd_score(cfg, o.out);
  for (const auto& [name, series] : scores) {
    std::size_t n = 0;
    for (const auto& s : series) n += s.entries.size();
    std::printf("%-16s %zu nodes, %zu scores\n", name.c_str(), series.size(), n);
  }
  return 0;
}

int run_evaluate(const Options& o) {
  auto cfg = resolve(o);
  if (cfg.data_dir.empty()) throw ruad::ConfigError("no data directory (set data_dir or pass --data)");
  const auto summary = ruad::cmd_evaluate(cfg, o.out);
  bool any_ok = false;
  for (const auto& [name, m] : summary) {
    if (m.ok) {
      any_ok = true;
      std::printf("%-16s AUC %.4f  (%zu pos / %zu neg, %zu nodes)\n", name.c_str(), m.roc.auc, m.roc.positives,
                  m.roc.negatives, m.nodes_scored);
    } else {
      std::printf("%-16s error: %s\n", name.c_str(), m.error.c_str());
    }
  }
  return any_ok ? 0 : static_cast<int>(ruad::ErrorKind::data);
}

void add_common(CLI::App* sub, Options& o, bool config_required) {
  auto* c = sub->add_option("--config", o.config, "run configuration (JSON)");
  if (config_required) c->required();
  c->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output directory")->required();
  sub->add_option("--data", o.data, "override the configured data directory");
  sub->add_option("-j,--jobs", o.jobs, "worker threads");
  sub->add_flag("-v,--verbose", o.verbose, "debug logging");
  sub->add_flag("-q,--quiet", o.quiet, "only warnings and errors");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-node anomaly detection for HPC telemetry"};
  app.require_subcommand(1);
  Options o;
  auto* gen = app.add_subcommand("generate", "write a synthetic telemetry corpus");
  auto* train = app.add_subcommand("train", "train every node/method combination");
  auto* score = app.add_subcommand("score", "score node test splits");
  auto* eval = app.add_subcommand("evaluate", "pool scores and write ROC reports");
  add_common(gen, o, false);
  add_common(train, o, true);
  add_common(score, o, true);
  add_common(eval, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ruad::ErrorKind::config);
  }
  if (o.verbose) ruad::log::set_level(ruad::log::Level::debug);
  if (o.quiet) ruad::log::set_level(ruad::log::Level::warn);

  try {
    if (gen->parsed()) return run_generate(o);
    if (train->parsed()) return run_train(o);
    if (score->parsed()) return run_score(o);
    return run_evaluate(o);
  } catch (const ruad::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ruad::ErrorKind::data);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ruad::ErrorKind::data);
  }
}
