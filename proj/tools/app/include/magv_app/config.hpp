// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "magv/classifiers.hpp"
#include "magv/embedding.hpp"
#include "magv/filtering.hpp"
#include "magv/orchestration.hpp"
#include "magv/similarity.hpp"

namespace magv::app {

struct RoleModels {
  std::string investigator = "gpt-4o";
  std::string assistant = "gpt-4o";
  std::string reverse_engineer = "gpt-4o";
  std::string judge = "gpt-4o";
};

struct LlmSettings {
  std::string provider = "mock";  // mock | http
  std::string mock_script;
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  /// Name of the environment variable holding the API key.
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 2;
  std::size_t timeout_seconds = 120;
  RoleModels models;
  /// Optional JSONL transcript of every exchange.
  std::string transcript;
};

struct EmbeddingSettings {
  std::string provider = "hashing";  // hashing | remote
  std::size_t dimension = 256;
  RemoteEmbedderConfig remote;
};

struct EvaluationSettings {
  std::size_t folds = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool use_tfidf = true;
  std::size_t ablation_folds = 5;
  std::size_t workers = 1;
};

struct JudgeSettings {
  bool system_prompt = true;
  LabelOrder label_order = LabelOrder::incorrect_first;
  std::size_t max_reasks = 2;
};

struct Paths {
  std::string seeds;
  std::string labels;
  std::string exemplars;
  std::string out_dir = "magv-out";
};

/// Everything a run depends on. Loaded from one JSON document; see
/// README.md for the schema. Relative paths resolve against the config
/// file's directory.
struct PipelineConfig {
  std::uint64_t seed = 1;
  LlmSettings llm;
  EmbeddingSettings embedding;
  OrchestrationConfig orchestration;
  FeatureOptions features;
  std::vector<ModelSpec> classifiers;  // empty means the default suite
  EvaluationSettings evaluation;
  FilterParams filtering;
  std::vector<std::string> drop_ids;
  JudgeSettings judge;
  Paths paths;

  /// The configured classifiers, or the default suite for the feature mode.
  std::vector<ModelSpec> model_suite() const;
};

/// Parses a config document. Unknown keys and anything that looks like a
/// credential are rejected. `base_dir` anchors relative paths. Call
/// validate() once command-line overrides are applied.
PipelineConfig parse_config(std::string_view json_text, const std::string& base_dir = ".");
PipelineConfig load_config(const std::string& path);

/// Throws ValidationError for zero counts and missing input files.
void validate(const PipelineConfig& config);

/// The effective config as JSON (credentials never appear in it).
std::string render_config(const PipelineConfig& config);

}  // namespace magv::app
