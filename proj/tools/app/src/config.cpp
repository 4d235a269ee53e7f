// SPDX-License-Identifier: Apache-2.0

#include "magv_app/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "magv/error.hpp"

namespace magv::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool looks_like_credential(std::string key) {
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  if (key == "api_key_env") return false;
  for (const char* word : {"api_key", "apikey", "password", "secret", "token", "authorization", "bearer"})
    if (key.find(word) != std::string::npos) return true;
  return false;
}

void reject_credentials(const json& j, const std::string& where) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      if (looks_like_credential(key))
        throw ValidationError("config key '" + where + key +
                              "' looks like a credential; credentials are read only from the "
                              "environment variable named by llm.api_key_env / embedding.api_key_env");
      reject_credentials(value, where + key + ".");
    }
  } else if (j.is_array()) {
    for (const auto& v : j) reject_credentials(v, where);
  }
}

// Reads known keys from one object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ValidationError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: '" + qualified(key) + "' has the wrong type");
    }
  }

  std::optional<json> sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return *it;
  }

  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ValidationError("config: unknown key '" + qualified(key) + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

ModelSpec parse_spec(const json& j, std::size_t index, ArgMode mode) {
  Section s(j, "classifiers[" + std::to_string(index) + "]");
  std::string algorithm;
  s.get("algorithm", algorithm);
  if (algorithm.empty()) throw ValidationError("config: " + s.qualified("algorithm") + " is required");
  ModelSpec spec = default_spec(algorithm_from_string(algorithm), mode);
  s.get("k", spec.k);
  s.get("learning_rate", spec.learning_rate);
  s.get("iterations", spec.iterations);
  s.get("l2", spec.l2);
  s.get("var_smoothing", spec.var_smoothing);
  s.get("max_depth", spec.max_depth);
  s.get("min_samples_leaf", spec.min_samples_leaf);
  s.get("n_trees", spec.n_trees);
  s.get("max_features", spec.max_features);
  s.get("bootstrap", spec.bootstrap);
  s.get("seed", spec.seed);
  s.finish();
  return spec;
}

json spec_json(const ModelSpec& s) {
  json j{{"algorithm", std::string(to_string(s.algorithm))}, {"seed", s.seed}};
  switch (s.algorithm) {
    case Algorithm::knn: j["k"] = s.k; break;
    case Algorithm::logistic_regression:
      j["learning_rate"] = s.learning_rate;
      j["iterations"] = s.iterations;
      j["l2"] = s.l2;
      break;
    case Algorithm::gaussian_nb: j["var_smoothing"] = s.var_smoothing; break;
    case Algorithm::random_forest:
      j["n_trees"] = s.n_trees;
      j["max_features"] = s.max_features;
      j["bootstrap"] = s.bootstrap;
      [[fallthrough]];
    case Algorithm::decision_tree:
      j["max_depth"] = s.max_depth;
      j["min_samples_leaf"] = s.min_samples_leaf;
      break;
  }
  return j;
}

LabelOrder label_order_from_string(const std::string& s) {
  if (s == "incorrect_first") return LabelOrder::incorrect_first;
  if (s == "correct_first") return LabelOrder::correct_first;
  throw ValidationError("config: judge.label_order must be incorrect_first or correct_first");
}

void require_file(const std::string& path, const std::string& what) {
  if (!path.empty() && !fs::is_regular_file(path))
    throw ValidationError("config: " + what + " '" + path + "' does not exist");
}

void require_positive(std::size_t v, const std::string& what) {
  if (v == 0) throw ValidationError("config: " + what + " must be at least 1");
}

}  // namespace

std::vector<ModelSpec> PipelineConfig::model_suite() const {
  return classifiers.empty() ? default_model_suite(features.mode) : classifiers;
}

PipelineConfig parse_config(std::string_view json_text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_credentials(root, "");

  PipelineConfig c;
  Section top(root, "");
  top.get("seed", c.seed);

  if (auto j = top.sub("llm")) {
    Section s(*j, "llm");
    s.get("provider", c.llm.provider);
    s.get("mock_script", c.llm.mock_script);
    s.get("base_url", c.llm.base_url);
    s.get("path", c.llm.path);
    s.get("api_key_env", c.llm.api_key_env);
    s.get("max_in_flight", c.llm.max_in_flight);
    s.get("max_retries", c.llm.max_retries);
    s.get("timeout_seconds", c.llm.timeout_seconds);
    s.get("transcript", c.llm.transcript);
    if (auto m = s.sub("models")) {
      Section ms(*m, "llm.models");
      ms.get("investigator", c.llm.models.investigator);
      ms.get("assistant", c.llm.models.assistant);
      ms.get("reverse_engineer", c.llm.models.reverse_engineer);
      ms.get("judge", c.llm.models.judge);
      ms.finish();
    }
    s.finish();
  }

  if (auto j = top.sub("temperatures")) {
    Section s(*j, "temperatures");
    auto& t = c.orchestration.temperatures;
    s.get("investigator", t.investigator);
    s.get("assistant", t.assistant);
    s.get("reverse_engineer", t.reverse_engineer);
    s.get("judge", t.judge);
    s.finish();
  }

  if (auto j = top.sub("generation")) {
    Section s(*j, "generation");
    auto& o = c.orchestration;
    std::string mct_mode(to_string(o.mct_mode));
    s.get("n_questions", o.n_questions);
    s.get("n_runs", o.n_runs);
    s.get("n_alternates", o.n_alternates);
    s.get("min_alternates", o.min_alternates);
    s.get("step_cap", o.step_cap);
    s.get("retry_cap", o.retry_cap);
    s.get("concurrency", o.concurrency);
    s.get("mct_mode", mct_mode);
    o.mct_mode = arg_mode_from_string(mct_mode);
    s.finish();
  }

  if (auto j = top.sub("embedding")) {
    Section s(*j, "embedding");
    auto& r = c.embedding.remote;
    std::size_t timeout = static_cast<std::size_t>(r.timeout.count());
    s.get("provider", c.embedding.provider);
    s.get("dimension", c.embedding.dimension);
    s.get("base_url", r.base_url);
    s.get("path", r.path);
    s.get("model", r.model);
    s.get("api_key_env", r.api_key_env);
    s.get("max_in_flight", r.max_in_flight);
    s.get("max_retries", r.max_retries);
    s.get("timeout_seconds", timeout);
    r.timeout = std::chrono::seconds(timeout);
    s.finish();
  }

  if (auto j = top.sub("features")) {
    Section s(*j, "features");
    std::string mode(to_string(c.features.mode)), aggregation(to_string(c.features.aggregation)),
        alignment(to_string(c.features.ao_alignment));
    s.get("mode", mode);
    s.get("aggregation", aggregation);
    s.get("ao_alignment", alignment);
    s.get("ged_cap", c.features.ged_cap);
    c.features.mode = arg_mode_from_string(mode);
    c.features.aggregation = aggregation_from_string(aggregation);
    c.features.ao_alignment = arg_alignment_from_string(alignment);
    s.finish();
  }

  if (auto j = top.sub("classifiers")) {
    if (!j->is_array()) throw ValidationError("config: 'classifiers' must be a list");
    for (std::size_t i = 0; i < j->size(); ++i) c.classifiers.push_back(parse_spec((*j)[i], i, c.features.mode));
  }

  if (auto j = top.sub("evaluation")) {
    Section s(*j, "evaluation");
    s.get("folds", c.evaluation.folds);
    s.get("seeds", c.evaluation.seeds);
    s.get("use_tfidf", c.evaluation.use_tfidf);
    s.get("ablation_folds", c.evaluation.ablation_folds);
    s.get("workers", c.evaluation.workers);
    s.finish();
  }

  if (auto j = top.sub("filtering")) {
    Section s(*j, "filtering");
    s.get("target_dim", c.filtering.target_dim);
    s.get("eps", c.filtering.eps);
    s.get("min_pts", c.filtering.min_pts);
    s.get("per_cluster", c.filtering.per_cluster);
    s.get("workers", c.filtering.workers);
    s.get("drop_ids", c.drop_ids);
    s.finish();
  }

  if (auto j = top.sub("judge")) {
    Section s(*j, "judge");
    std::string order = "incorrect_first";
    s.get("system_prompt", c.judge.system_prompt);
    s.get("label_order", order);
    s.get("max_reasks", c.judge.max_reasks);
    c.judge.label_order = label_order_from_string(order);
    s.finish();
  }

  if (auto j = top.sub("paths")) {
    Section s(*j, "paths");
    s.get("seeds", c.paths.seeds);
    s.get("labels", c.paths.labels);
    s.get("exemplars", c.paths.exemplars);
    s.get("out_dir", c.paths.out_dir);
    s.finish();
  }
  top.finish();

  c.orchestration.seed = c.seed;
  c.llm.mock_script = resolve(base_dir, c.llm.mock_script);
  c.llm.transcript = resolve(base_dir, c.llm.transcript);
  c.paths.seeds = resolve(base_dir, c.paths.seeds);
  c.paths.labels = resolve(base_dir, c.paths.labels);
  c.paths.exemplars = resolve(base_dir, c.paths.exemplars);
  c.paths.out_dir = resolve(base_dir, c.paths.out_dir);
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  const auto dir = fs::path(path).parent_path();
  return parse_config(text.str(), dir.empty() ? "." : dir.string());
}

void validate(const PipelineConfig& c) {
  const auto& o = c.orchestration;
  require_positive(o.n_questions, "generation.n_questions");
  require_positive(o.n_runs, "generation.n_runs");
  require_positive(o.n_alternates, "generation.n_alternates");
  require_positive(o.step_cap, "generation.step_cap");
  require_positive(o.concurrency, "generation.concurrency");
  if (o.min_alternates > o.n_alternates)
    throw ValidationError("config: generation.min_alternates exceeds generation.n_alternates");
  require_positive(c.llm.max_in_flight, "llm.max_in_flight");
  require_positive(c.embedding.dimension, "embedding.dimension");
  require_positive(c.embedding.remote.max_in_flight, "embedding.max_in_flight");
  require_positive(c.features.ged_cap, "features.ged_cap");
  if (c.evaluation.folds < 2 || c.evaluation.ablation_folds < 2)
    throw ValidationError("config: evaluation folds must be at least 2");
  if (c.evaluation.seeds.empty()) throw ValidationError("config: evaluation.seeds must not be empty");
  require_positive(c.evaluation.workers, "evaluation.workers");
  require_positive(c.filtering.target_dim, "filtering.target_dim");
  require_positive(c.filtering.min_pts, "filtering.min_pts");
  require_positive(c.filtering.per_cluster, "filtering.per_cluster");
  require_positive(c.filtering.workers, "filtering.workers");
  if (!(c.filtering.eps > 0)) throw ValidationError("config: filtering.eps must be positive");
  if (c.llm.provider != "mock" && c.llm.provider != "http")
    throw ValidationError("config: llm.provider must be mock or http");
  if (c.embedding.provider != "hashing" && c.embedding.provider != "remote")
    throw ValidationError("config: embedding.provider must be hashing or remote");
  for (const auto& spec : c.model_suite()) magv::validate(spec);
  require_file(c.llm.mock_script, "llm.mock_script");
  require_file(c.paths.seeds, "paths.seeds");
  require_file(c.paths.labels, "paths.labels");
  require_file(c.paths.exemplars, "paths.exemplars");
}

std::string render_config(const PipelineConfig& c) {
  const auto& o = c.orchestration;
  json models = json::array();
  for (const auto& spec : c.model_suite()) models.push_back(spec_json(spec));
  const json j{
      {"seed", c.seed},
      {"llm",
       {{"provider", c.llm.provider},
        {"mock_script", c.llm.mock_script},
        {"base_url", c.llm.base_url},
        {"path", c.llm.path},
        {"api_key_env", c.llm.api_key_env},
        {"max_in_flight", c.llm.max_in_flight},
        {"max_retries", c.llm.max_retries},
        {"timeout_seconds", c.llm.timeout_seconds},
        {"transcript", c.llm.transcript},
        {"models",
         {{"investigator", c.llm.models.investigator},
          {"assistant", c.llm.models.assistant},
          {"reverse_engineer", c.llm.models.reverse_engineer},
          {"judge", c.llm.models.judge}}}}},
      {"temperatures",
       {{"investigator", o.temperatures.investigator},
        {"assistant", o.temperatures.assistant},
        {"reverse_engineer", o.temperatures.reverse_engineer},
        {"judge", o.temperatures.judge}}},
      {"generation",
       {{"n_questions", o.n_questions},
        {"n_runs", o.n_runs},
        {"n_alternates", o.n_alternates},
        {"min_alternates", o.min_alternates},
        {"step_cap", o.step_cap},
        {"retry_cap", o.retry_cap},
        {"concurrency", o.concurrency},
        {"mct_mode", std::string(to_string(o.mct_mode))}}},
      {"embedding",
       {{"provider", c.embedding.provider},
        {"dimension", c.embedding.dimension},
        {"base_url", c.embedding.remote.base_url},
        {"path", c.embedding.remote.path},
        {"model", c.embedding.remote.model},
        {"api_key_env", c.embedding.remote.api_key_env},
        {"max_in_flight", c.embedding.remote.max_in_flight},
        {"max_retries", c.embedding.remote.max_retries},
        {"timeout_seconds", c.embedding.remote.timeout.count()}}},
      {"features",
       {{"mode", std::string(to_string(c.features.mode))},
        {"aggregation", std::string(to_string(c.features.aggregation))},
        {"ao_alignment", std::string(to_string(c.features.ao_alignment))},
        {"ged_cap", c.features.ged_cap}}},
      {"classifiers", models},
      {"evaluation",
       {{"folds", c.evaluation.folds},
        {"seeds", c.evaluation.seeds},
        {"use_tfidf", c.evaluation.use_tfidf},
        {"ablation_folds", c.evaluation.ablation_folds},
        {"workers", c.evaluation.workers}}},
      {"filtering",
       {{"target_dim", c.filtering.target_dim},
        {"eps", c.filtering.eps},
        {"min_pts", c.filtering.min_pts},
        {"per_cluster", c.filtering.per_cluster},
        {"workers", c.filtering.workers},
        {"drop_ids", c.drop_ids}}},
      {"judge",
       {{"system_prompt", c.judge.system_prompt},
        {"label_order", c.judge.label_order == LabelOrder::incorrect_first ? "incorrect_first" : "correct_first"},
        {"max_reasks", c.judge.max_reasks}}},
      {"paths",
       {{"seeds", c.paths.seeds},
        {"labels", c.paths.labels},
        {"exemplars", c.paths.exemplars},
        {"out_dir", c.paths.out_dir}}}};
  return j.dump(2) + "\n";
}

}  // namespace magv::app
