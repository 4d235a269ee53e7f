// SPDX-License-Identifier: Apache-2.0

#include "magv_app/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "magv/evaluation.hpp"
#include "magv/filtering.hpp"
#include "magv/orchestration.hpp"
#include "magv/random.hpp"

namespace magv::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- files

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

const std::string& file(const FileArgs& files, const std::string& key) {
  static const std::string empty;
  const auto it = files.find(key);
  return it == files.end() ? empty : it->second;
}

// ---------------------------------------------------------------- providers

class Clients {
 public:
  explicit Clients(const PipelineConfig& c) {
    if (c.llm.provider == "mock") {
      if (c.llm.mock_script.empty())
        throw ValidationError("the mock provider needs --mock-script or llm.mock_script");
      auto mock = MockLlmClient::from_file(c.llm.mock_script);
      LlmClient* shared = wrap(std::move(mock), c);
      investigator = assistant = reverse_engineer = judge = shared;
      return;
    }
    auto make = [&](const std::string& model) {
      HttpLlmConfig h;
      h.base_url = c.llm.base_url;
      h.path = c.llm.path;
      h.model = model;
      h.api_key_env = c.llm.api_key_env;
      h.max_in_flight = c.llm.max_in_flight;
      h.max_retries = c.llm.max_retries;
      h.timeout = std::chrono::seconds(c.llm.timeout_seconds);
      return wrap(std::make_unique<HttpLlmClient>(h), c);
    };
    investigator = make(c.llm.models.investigator);
    assistant = make(c.llm.models.assistant);
    reverse_engineer = make(c.llm.models.reverse_engineer);
    judge = make(c.llm.models.judge);
  }

  LlmClient* investigator = nullptr;
  LlmClient* assistant = nullptr;
  LlmClient* reverse_engineer = nullptr;
  LlmClient* judge = nullptr;

 private:
  LlmClient* wrap(std::unique_ptr<LlmClient> client, const PipelineConfig& c) {
    owned_.push_back(std::move(client));
    if (!c.llm.transcript.empty()) {
      ensure_parent(c.llm.transcript);
      owned_.push_back(std::make_unique<LoggingLlmClient>(*owned_.back(), c.llm.transcript));
    }
    return owned_.back().get();
  }

  std::vector<std::unique_ptr<LlmClient>> owned_;
};

std::unique_ptr<EmbeddingProvider> make_embedder(const PipelineConfig& c, HashingEmbedder::Tokens tokens) {
  if (c.embedding.provider == "remote") return std::make_unique<RemoteEmbedder>(c.embedding.remote);
  return std::make_unique<HashingEmbedder>(tokens, c.embedding.dimension);
}

// ---------------------------------------------------------------- stages

void stage_generate(const PipelineConfig& c, const FileArgs& f) {
  const auto seeds = read_dataset(file(f, "seeds"));
  if (seeds.size() < 2) throw ValidationError("generation needs at least two seed records");
  Clients clients(c);
  const FixtureToolExecutor tools;
  std::vector<QuestionRecord> out;
  std::size_t retries = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    // Pair each seed with a different seed's trajectory as the target.
    Rng rng(mix_seed(c.seed, i));
    const std::size_t j = (i + 1 + static_cast<std::size_t>(rng.below(seeds.size() - 1))) % seeds.size();
    const auto result = generate_questions({seeds[i].question, seeds[i].trajectory}, seeds[j].trajectory,
                                           *clients.investigator, tools, c.orchestration);
    retries += result.retries;
    for (std::size_t k = 0; k < result.questions.size(); ++k)
      out.push_back(QuestionRecord{seeds[i].id + "." + std::to_string(k + 1), result.questions[k],
                                   std::nullopt, {}, std::nullopt});
    spdlog::debug("generate: seed {} paired with {}, {} questions", seeds[i].id, seeds[j].id,
                  result.questions.size());
  }
  ensure_parent(file(f, "questions"));
  write_dataset(file(f, "questions"), out);
  spdlog::info("generate: {} seeds -> {} questions ({} list retries)", seeds.size(), out.size(), retries);
}

void stage_filter(const PipelineConfig& c, const FileArgs& f) {
  const auto questions = read_dataset(file(f, "questions"));
  const auto embedder = make_embedder(c, HashingEmbedder::Tokens::words);
  const std::set<std::string> drop(c.drop_ids.begin(), c.drop_ids.end());
  const auto result = filter_pipeline(questions, *embedder, c.filtering, drop);
  ensure_parent(file(f, "selected"));
  write_dataset(file(f, "selected"), result.kept);
  write_text(file(f, "report"), render_filter_report(result));
  spdlog::info("filter: {} questions -> {} kept", questions.size(), result.kept.size());
}

void stage_mct(const PipelineConfig& c, const FileArgs& f) {
  auto records = read_dataset(file(f, "questions"));
  std::map<std::string, int> labels;
  if (const auto& path = file(f, "labels"); !path.empty()) labels = read_labels(path);
  Clients clients(c);
  const FixtureToolExecutor tools;
  std::size_t unlabeled = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    MostCommonTrajectory mct;
    try {
      mct = run_mct(r.question, *clients.assistant, tools, c.orchestration, mix_seed(c.seed, i));
    } catch (const Error& e) {
      throw GenerationError("record '" + r.id + "': " + e.what());
    }
    r.trajectory = mct.trajectory;
    r.response = mct.response;
    if (const auto it = labels.find(r.id); it != labels.end()) r.label = it->second;
    else if (!labels.empty()) ++unlabeled;
    spdlog::debug("mct: {} modal group of {}", r.id, mct.group_size);
  }
  if (unlabeled) spdlog::warn("mct: {} records have no label in the labels file", unlabeled);
  ensure_parent(file(f, "dataset"));
  write_dataset(file(f, "dataset"), records);
  spdlog::info("mct: {} questions answered {} times each", records.size(), c.orchestration.n_runs);
}

void stage_reverse(const PipelineConfig& c, const FileArgs& f) {
  const auto records = read_dataset(file(f, "dataset"));
  Clients clients(c);
  const FixtureToolExecutor tools;
  std::vector<VerificationCase> cases;
  for (const auto& r : records)
    cases.push_back(build_verification_case(r, *clients.reverse_engineer, *clients.assistant, tools, c.orchestration));
  ensure_parent(file(f, "cases"));
  write_cases(file(f, "cases"), cases);
  spdlog::info("reverse: {} cases with {} alternates each", cases.size(), c.orchestration.n_alternates);
}

void stage_features(const PipelineConfig& c, const FileArgs& f) {
  const auto cases = read_cases(file(f, "cases"));
  if (cases.empty()) throw ValidationError("no cases in '" + file(f, "cases") + "'");
  const auto embedder = make_embedder(c, HashingEmbedder::Tokens::calls);
  const auto rows = compute_feature_rows(cases, c.features, *embedder, c.evaluation.workers);
  const auto columns = case_feature_names(c.features, cases.front().alternates.size());
  write_text(file(f, "features"), render_feature_table(columns, rows));
  spdlog::info("features: {} rows x {} columns", rows.size(), columns.size());
}

CvProtocol protocol_for(const PipelineConfig& c) {
  CvProtocol p;
  p.folds = c.evaluation.folds;
  p.seeds = c.evaluation.seeds;
  p.mode = c.features.mode;
  p.aggregation = c.features.aggregation;
  p.use_tfidf = c.evaluation.use_tfidf;
  p.workers = c.evaluation.workers;
  return p;
}

std::vector<Sample> samples_from_table(const FeatureTable& table, const std::vector<VerificationCase>* cases) {
  std::map<std::string, std::string> questions;
  if (cases)
    for (const auto& vc : *cases) questions[vc.id] = vc.base_question;
  std::vector<Sample> samples;
  for (const auto& row : table.rows) {
    if (!row.label) throw ValidationError("feature row '" + row.id + "' has no label");
    std::string question;
    if (cases) {
      const auto it = questions.find(row.id);
      if (it == questions.end()) throw ValidationError("feature row '" + row.id + "' has no matching case");
      question = it->second;
    }
    samples.push_back(Sample{row.id, question, row.values, *row.label});
  }
  return samples;
}

void stage_evaluate(const PipelineConfig& c, const FileArgs& f) {
  const auto cases = read_cases(file(f, "cases"));
  std::vector<Sample> samples;
  if (const auto& features = file(f, "features"); !features.empty()) {
    samples = samples_from_table(parse_feature_table(read_text(features)), &cases);
  } else {
    const auto embedder = make_embedder(c, HashingEmbedder::Tokens::calls);
    samples = make_samples(cases, c.features, *embedder, c.evaluation.workers);
  }
  const auto specs = c.model_suite();
  const auto report = cross_validate(samples, specs, protocol_for(c));
  write_text(file(f, "report"), render_cv_report(report));
  write_text(file(f, "summary"), render_cv_summary(report));
  for (const auto& m : report.summary)
    spdlog::info("evaluate: {} accuracy {:.4f} f1 {:.4f}", m.model, m.accuracy, m.f1);
}

void stage_train(const PipelineConfig& c, const FileArgs& f) {
  const auto table = parse_feature_table(read_text(file(f, "features")));
  const auto samples = samples_from_table(table, nullptr);
  FeatureMatrix x;
  std::vector<int> y;
  for (const auto& s : samples) {
    x.push_back(s.trajectory_features);
    y.push_back(s.label);
  }
  auto spec = c.model_suite().front();
  if (const auto& algorithm = file(f, "algorithm"); !algorithm.empty()) {
    const auto wanted = algorithm_from_string(algorithm);
    const auto suite = c.model_suite();
    const auto it = std::find_if(suite.begin(), suite.end(), [&](const ModelSpec& s) { return s.algorithm == wanted; });
    spec = it != suite.end() ? *it : default_spec(wanted, c.features.mode);
  }
  spec.seed = c.seed;
  const auto model = train(spec, x, y);
  write_text(file(f, "model"), save_model(model) + "\n");
  spdlog::info("train: {} on {} rows", model_label(spec), x.size());
}

void stage_ablate(const PipelineConfig& c, const FileArgs& f) {
  const auto table = parse_feature_table(read_text(file(f, "features")));
  const auto samples = samples_from_table(table, nullptr);
  const auto specs = c.model_suite();
  const auto report = ablate_features(samples, specs, table.columns, c.evaluation.ablation_folds,
                                      c.evaluation.seeds, c.evaluation.workers);
  write_text(file(f, "report"), render_ablation_report(report));
  spdlog::info("ablate: {} subsets x {} models", report.subsets_evaluated, report.models.size());
}

void stage_judge(const PipelineConfig& c, const FileArgs& f) {
  const auto records = read_dataset(file(f, "dataset"));
  JudgeOptions options;
  options.system_prompt = c.judge.system_prompt;
  options.label_order = c.judge.label_order;
  options.max_reasks = c.judge.max_reasks;
  options.temperature = c.orchestration.temperatures.judge;
  for (const auto& e : read_dataset(file(f, "exemplars"))) {
    if (!e.label) throw ValidationError("judge exemplar '" + e.id + "' has no label");
    options.exemplars.push_back(JudgeExemplar{e.question, e.trajectory, *e.label});
  }
  Clients clients(c);
  std::string out;
  std::vector<int> gold, predicted;
  for (const auto& r : records) {
    const auto v = judge_trajectory(r, *clients.judge, options);
    json line{{"id", r.id}, {"score", v.label}, {"attempts", v.attempts}, {"rationale", v.rationale}};
    line["gold"] = r.label ? json(*r.label) : json(nullptr);
    out += line.dump() + "\n";
    if (r.label) {
      gold.push_back(*r.label);
      predicted.push_back(v.label);
    }
  }
  write_text(file(f, "verdicts"), out);
  std::ostringstream summary;
  summary.precision(17);
  summary << "records,labeled,accuracy,f1,kappa\n" << records.size() << "," << gold.size();
  if (gold.empty()) {
    summary << ",,,\n";
  } else {
    summary << "," << accuracy(predicted, gold) << "," << f1(predicted, gold) << ","
            << cohens_kappa(predicted, gold) << "\n";
    spdlog::info("judge: {} labeled records, accuracy {:.4f}, kappa {:.4f}", gold.size(),
                 accuracy(predicted, gold), cohens_kappa(predicted, gold));
  }
  write_text(file(f, "summary"), summary.str());
}

using StageFn = void (*)(const PipelineConfig&, const FileArgs&);

const std::map<std::string, StageFn>& stage_functions() {
  static const std::map<std::string, StageFn> fns{
      {"generate", stage_generate}, {"filter", stage_filter},     {"mct", stage_mct},
      {"reverse", stage_reverse},   {"features", stage_features}, {"evaluate", stage_evaluate},
      {"train", stage_train},       {"ablate", stage_ablate},     {"judge", stage_judge}};
  return fns;
}

void check_files(const StageSpec& spec, const FileArgs& files) {
  for (const auto& key : spec.inputs) {
    const auto& path = file(files, key);
    if (path.empty()) throw ValidationError("missing --" + key + " file");
    if (!fs::is_regular_file(path)) throw ValidationError("input '" + path + "' (--" + key + ") does not exist");
  }
  for (const auto& key : spec.optional_inputs) {
    const auto& path = file(files, key);
    if (!path.empty() && !fs::is_regular_file(path))
      throw ValidationError("input '" + path + "' (--" + key + ") does not exist");
  }
  for (const auto& key : spec.outputs)
    if (file(files, key).empty()) throw ValidationError("missing --" + key + " file");
}

void run_stage(const std::string& name, const PipelineConfig& config, const FileArgs& files) {
  try {
    check_files(stage_spec(name), files);
    stage_functions().at(name)(config, files);
  } catch (const Error& e) {
    throw StageError(name, std::string(to_string(e.kind())), e.what());
  } catch (const fs::filesystem_error& e) {
    throw StageError(name, "io", e.what());
  }
}

}  // namespace

const std::vector<StageSpec>& stage_specs() {
  static const std::vector<StageSpec> specs{
      {"generate", {"seeds"}, {}, {"questions"}, {}, "investigator writes questions from seed examples"},
      {"filter", {"questions"}, {}, {"selected", "report"}, {}, "embed, reduce, cluster, keep representatives"},
      {"mct", {"questions"}, {"labels"}, {"dataset"}, {}, "answer each question n_runs times, keep the modal trajectory"},
      {"reverse", {"dataset"}, {}, {"cases"}, {}, "alternate questions from each response, answered by the assistant"},
      {"features", {"cases"}, {}, {"features"}, {}, "similarity features between base and alternate trajectories"},
      {"evaluate", {"cases"}, {"features"}, {"report", "summary"}, {}, "stratified cross-validation of the classifier suite"},
      {"train", {"features"}, {}, {"model"}, {"algorithm"}, "fit one classifier on the whole feature table"},
      {"ablate", {"features"}, {}, {"report"}, {}, "cross-validate every non-empty feature subset"},
      {"judge", {"dataset", "exemplars"}, {}, {"verdicts", "summary"}, {}, "LLM-as-a-judge baseline"},
  };
  return specs;
}

const StageSpec& stage_spec(const std::string& command) {
  for (const auto& s : stage_specs())
    if (s.name == command) return s;
  throw ValidationError("unknown command '" + command + "'");
}

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages{"generate", "filter", "mct", "reverse", "features", "evaluate"};
  return stages;
}

std::map<std::string, FileArgs> pipeline_files(const PipelineConfig& config, const FileArgs& overrides) {
  auto pick = [&](const std::string& key, const std::string& fallback) {
    const auto it = overrides.find(key);
    return it != overrides.end() && !it->second.empty() ? it->second : fallback;
  };
  const fs::path dir = pick("out_dir", config.paths.out_dir);
  auto at = [&](const char* name) { return (dir / name).string(); };
  const auto questions = at("questions.jsonl"), selected = at("selected.jsonl"), dataset = at("dataset.jsonl"),
             cases = at("cases.jsonl"), features = at("features.csv");
  FileArgs mct{{"questions", selected}, {"dataset", dataset}};
  if (const auto labels = pick("labels", config.paths.labels); !labels.empty()) mct["labels"] = labels;
  return {
      {"generate", {{"seeds", pick("seeds", config.paths.seeds)}, {"questions", questions}}},
      {"filter", {{"questions", questions}, {"selected", selected}, {"report", at("filter_report.csv")}}},
      {"mct", mct},
      {"reverse", {{"dataset", dataset}, {"cases", cases}}},
      {"features", {{"cases", cases}, {"features", features}}},
      {"evaluate",
       {{"cases", cases}, {"features", features}, {"report", at("cv_report.json")}, {"summary", at("cv_summary.csv")}}},
  };
}

void run_command(const std::string& command, const PipelineConfig& config, const FileArgs& files) {
  if (command != "pipeline") {
    stage_spec(command);
    run_stage(command, config, files);
    return;
  }
  const auto plan = pipeline_files(config, files);
  for (const auto& stage : pipeline_stages()) {
    spdlog::info("pipeline: stage {}", stage);
    run_stage(stage, config, plan.at(stage));
  }
}

std::string describe_plan(const std::string& command, const PipelineConfig& config, const FileArgs& files) {
  auto line = [](const std::string& name, const FileArgs& f) {
    const auto& spec = stage_spec(name);
    auto list = [&](std::initializer_list<const std::vector<std::string>*> groups, bool required) {
      std::string s;
      for (const auto* keys : groups)
        for (const auto& k : *keys) {
          const auto& path = file(f, k);
          if (!required && path.empty()) continue;
          s += (s.empty() ? " " : ", ") + k + "=" + (path.empty() ? "?" : path);
        }
      return s;
    };
    std::string in = list({&spec.inputs}, true), extra = list({&spec.optional_inputs, &spec.options}, false);
    if (!extra.empty()) in += in.empty() ? extra : "," + extra;
    return name + ":" + in + " ->" + list({&spec.outputs}, true) + "\n      " + spec.summary + "\n";
  };
  if (command != "pipeline") return line(command, files);
  const auto plan = pipeline_files(config, files);
  std::string out = "pipeline (" + std::to_string(pipeline_stages().size()) + " stages)\n";
  std::size_t i = 1;
  for (const auto& stage : pipeline_stages()) out += "  " + std::to_string(i++) + ". " + line(stage, plan.at(stage));
  return out;
}

std::map<std::string, int> read_labels(const std::string& path) {
  std::istringstream in(read_text(path));
  std::map<std::string, int> labels;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (number == 1 && line == "id,label")) continue;
    const auto comma = line.find(',');
    const auto value = comma == std::string::npos ? std::string() : line.substr(comma + 1);
    if (comma == std::string::npos || (value != "0" && value != "1"))
      throw ParseError(path + ":" + std::to_string(number) + ": expected id,0|1");
    if (!labels.emplace(line.substr(0, comma), value == "1" ? 1 : 0).second)
      throw ValidationError(path + ":" + std::to_string(number) + ": duplicate id");
  }
  return labels;
}

}  // namespace magv::app
