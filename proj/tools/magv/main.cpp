// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "magv/error.hpp"
#include "magv_app/commands.hpp"
#include "magv_app/config.hpp"

namespace {

constexpr int kExitStage = 1;
constexpr int kExitConfig = 2;

// Flags that override their config counterparts when given.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> provider;
  std::optional<std::string> mock_script;
  std::optional<std::string> transcript;
  std::optional<std::size_t> concurrency;
  std::optional<std::size_t> n_questions;
  std::optional<std::size_t> n_runs;
  std::optional<std::size_t> n_alternates;
  std::optional<std::size_t> step_cap;
  std::optional<std::size_t> retry_cap;
  std::optional<std::string> mode;
  std::optional<std::string> aggregation;
  std::optional<std::size_t> folds;
  std::vector<std::uint64_t> cv_seeds;
  std::optional<bool> tfidf;
  std::optional<std::size_t> workers;
  std::optional<std::string> embedding;
  std::optional<double> eps;
  std::optional<std::size_t> min_pts;
  std::optional<std::size_t> target_dim;
  std::optional<std::size_t> per_cluster;
  std::optional<std::string> out_dir;
};

void apply(const Overrides& o, magv::app::PipelineConfig& c) {
  if (o.seed) c.seed = c.orchestration.seed = *o.seed;
  if (o.provider) c.llm.provider = *o.provider;
  if (o.mock_script) c.llm.mock_script = *o.mock_script;
  if (o.transcript) c.llm.transcript = *o.transcript;
  if (o.concurrency) c.orchestration.concurrency = c.llm.max_in_flight = *o.concurrency;
  if (o.n_questions) c.orchestration.n_questions = *o.n_questions;
  if (o.n_runs) c.orchestration.n_runs = *o.n_runs;
  if (o.n_alternates) c.orchestration.n_alternates = *o.n_alternates;
  if (o.step_cap) c.orchestration.step_cap = *o.step_cap;
  if (o.retry_cap) c.orchestration.retry_cap = *o.retry_cap;
  if (o.mode) {
    c.features.mode = magv::arg_mode_from_string(*o.mode);
    for (auto& spec : c.classifiers)
      if (spec.algorithm == magv::Algorithm::knn) spec.k = magv::default_spec(spec.algorithm, c.features.mode).k;
  }
  if (o.aggregation) c.features.aggregation = magv::aggregation_from_string(*o.aggregation);
  if (o.folds) c.evaluation.folds = *o.folds;
  if (!o.cv_seeds.empty()) c.evaluation.seeds = o.cv_seeds;
  if (o.tfidf) c.evaluation.use_tfidf = *o.tfidf;
  if (o.workers) c.evaluation.workers = c.filtering.workers = *o.workers;
  if (o.embedding) c.embedding.provider = *o.embedding;
  if (o.eps) c.filtering.eps = *o.eps;
  if (o.min_pts) c.filtering.min_pts = *o.min_pts;
  if (o.target_dim) c.filtering.target_dim = *o.target_dim;
  if (o.per_cluster) c.filtering.per_cluster = *o.per_cluster;
  if (o.out_dir) c.paths.out_dir = *o.out_dir;
}

const char* file_help(const std::string& key) {
  if (key == "seeds") return "seed dataset (JSONL question records with trajectories)";
  if (key == "questions") return "question dataset (JSONL)";
  if (key == "selected") return "filtered questions (JSONL)";
  if (key == "report") return "report (filter: CSV, evaluate and ablate: JSON)";
  if (key == "labels") return "annotations, CSV with header id,label";
  if (key == "dataset") return "answered questions with modal trajectories (JSONL)";
  if (key == "cases") return "verification cases (JSONL)";
  if (key == "features") return "feature table (CSV)";
  if (key == "summary") return "summary (CSV)";
  if (key == "model") return "trained model (JSON)";
  if (key == "exemplars") return "one correct and one incorrect labeled record (JSONL)";
  if (key == "verdicts") return "judge verdicts (JSONL)";
  if (key == "algorithm") return "knn | logistic_regression | gaussian_nb | decision_tree | random_forest";
  return "file";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"magv: synthetic question generation and deterministic trajectory verification"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "magv 0.1.0");

  std::string config_path;
  bool dry_run = false;
  bool show_config = false;
  int verbosity = 0;
  bool quiet = false;
  Overrides o;
  app.add_option("-c,--config", config_path, "pipeline config (JSON)")->check(CLI::ExistingFile);
  app.add_flag("--dry-run", dry_run, "print the planned stage graph and exit");
  app.add_flag("--print-config", show_config, "print the effective config and exit");
  app.add_flag("-v,--verbose", verbosity, "more logging (repeat for debug)");
  app.add_flag("-q,--quiet", quiet, "errors only");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--llm-provider", o.provider, "mock | http")->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--mock-script", o.mock_script, "scripted responses for the mock provider")->check(CLI::ExistingFile);
  app.add_option("--transcript", o.transcript, "append every LLM exchange to this JSONL file");
  app.add_option("--concurrency", o.concurrency, "concurrent agent runs and in-flight requests");
  app.add_option("--questions-per-seed", o.n_questions, "questions generated per seed example");
  app.add_option("--runs", o.n_runs, "assistant runs per question for the most common trajectory");
  app.add_option("--alternates", o.n_alternates, "alternate questions per case");
  app.add_option("--step-cap", o.step_cap, "tool turns allowed per assistant run");
  app.add_option("--retry-cap", o.retry_cap, "retries for short lists and failed alternate runs");
  app.add_option("--mode", o.mode, "with_args | without_args")->check(CLI::IsMember({"with_args", "without_args"}));
  app.add_option("--aggregation", o.aggregation, "mean | concat")->check(CLI::IsMember({"mean", "concat"}));
  app.add_option("--folds", o.folds, "cross-validation folds");
  app.add_option("--cv-seeds", o.cv_seeds, "cross-validation seeds");
  app.add_option("--tfidf", o.tfidf, "append question TF-IDF features (true/false)");
  app.add_option("--workers", o.workers, "worker threads for features, evaluation and filtering");
  app.add_option("--embedding-provider", o.embedding, "hashing | remote")->check(CLI::IsMember({"hashing", "remote"}));
  app.add_option("--eps", o.eps, "clustering radius");
  app.add_option("--min-pts", o.min_pts, "clustering density threshold");
  app.add_option("--target-dim", o.target_dim, "reduced embedding dimension");
  app.add_option("--per-cluster", o.per_cluster, "questions kept per cluster");

  std::map<std::string, magv::app::FileArgs> args;
  std::map<std::string, CLI::App*> subs;
  for (const auto& spec : magv::app::stage_specs()) {
    auto* sub = app.add_subcommand(spec.name, spec.summary);
    subs[spec.name] = sub;
    auto add = [&](const std::vector<std::string>& keys) {
      for (const auto& key : keys) sub->add_option("--" + key, args[spec.name][key], file_help(key));
    };
    add(spec.inputs);
    add(spec.optional_inputs);
    add(spec.outputs);
    add(spec.options);
  }
  auto* pipeline = app.add_subcommand("pipeline", "generate -> filter -> mct -> reverse -> features -> evaluate");
  subs["pipeline"] = pipeline;
  for (const char* key : {"seeds", "labels"})
    pipeline->add_option(std::string("--") + key, args["pipeline"][key], file_help(key));
  pipeline->add_option("--out-dir", o.out_dir, "directory for every pipeline artifact");

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("magv");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(quiet ? spdlog::level::err
                          : verbosity >= 2 ? spdlog::level::debug
                          : verbosity == 1 ? spdlog::level::info
                                           : spdlog::level::warn);

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;
  auto files = args[command];
  for (auto it = files.begin(); it != files.end();) it = it->second.empty() ? files.erase(it) : std::next(it);

  magv::app::PipelineConfig config;
  try {
    if (!config_path.empty()) config = magv::app::load_config(config_path);
    apply(o, config);
    magv::app::validate(config);
  } catch (const magv::Error& e) {
    std::cerr << "magv: invalid config: " << e.what() << "\n";
    return kExitConfig;
  }

  if (show_config) {
    std::cout << magv::app::render_config(config);
    return EXIT_SUCCESS;
  }
  if (dry_run) {
    std::cout << magv::app::describe_plan(command, config, files);
    return EXIT_SUCCESS;
  }
  try {
    magv::app::run_command(command, config, files);
  } catch (const magv::app::StageError& e) {
    std::cerr << "magv " << e.stage() << ": " << e.kind() << " error: " << e.what() << "\n";
    return kExitStage;
  } catch (const magv::Error& e) {
    std::cerr << "magv " << command << ": " << magv::to_string(e.kind()) << " error: " << e.what() << "\n";
    return kExitStage;
  }
  return EXIT_SUCCESS;
}
