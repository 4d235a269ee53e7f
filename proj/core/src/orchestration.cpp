// SPDX-License-Identifier: Apache-2.0

#include "magv/orchestration.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "magv/parallel.hpp"
#include "magv/random.hpp"

namespace magv {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string arg_or(const ToolCall& call, const std::string& key, std::string fallback) {
  const auto it = call.args.find(key);
  return it == call.args.end() ? std::move(fallback) : std::string(normalized_value(it->second));
}

// Deterministic pseudo-measurement in [lo, hi] derived from the inputs.
double measure(std::string_view salt, const ToolCall& call, double lo, double hi) {
  const auto h = fnv1a64(std::string(salt) + "|" + canonical_call(call, ArgMode::with_args));
  return lo + (hi - lo) * static_cast<double>(h % 10000) / 9999.0;
}

std::string round2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- fixture tools

std::vector<ToolSpec> FixtureToolExecutor::tools() const {
  return {
      {"get_current_weather", "Current weather for a city.",
       R"({"type":"object","properties":{"city":{"type":"string"},"units":{"type":"string","enum":["C","F"]}},"required":["city"]})"},
      {"convert_currency", "Convert an amount between two currencies.",
       R"({"type":"object","properties":{"amount":{"type":"number"},"from":{"type":"string"},"to":{"type":"string"}},"required":["amount","from","to"]})"},
      {"list_services", "List the services deployed in an environment.",
       R"({"type":"object","properties":{"environment":{"type":"string"}},"required":["environment"]})"},
      {"get_service_metrics", "Error rate and latency of a service over a time range.",
       R"({"type":"object","properties":{"service":{"type":"string"},"environment":{"type":"string"},"time_range":{"type":"object"}},"required":["service"]})"},
      {"get_error_logs", "Most common errors logged by a service over a time range.",
       R"({"type":"object","properties":{"service":{"type":"string"},"environment":{"type":"string"},"time_range":{"type":"object"}},"required":["service"]})"},
  };
}

std::string FixtureToolExecutor::execute(const ToolCall& call) const {
  const auto& name = call.name;
  json out;
  if (name == "get_current_weather") {
    const auto units = arg_or(call, "units", "F");
    const double t = measure("temp", call, units == "C" ? -5.0 : 23.0, units == "C" ? 35.0 : 95.0);
    static const char* conditions[] = {"clear", "cloudy", "rain", "snow", "windy"};
    out = {{"city", arg_or(call, "city", "")},
           {"temperature", round2(t)},
           {"units", units},
           {"conditions", conditions[fnv1a64(arg_or(call, "city", "")) % 5]}};
  } else if (name == "convert_currency") {
    const double rate = measure("rate", call, 0.5, 1.5);
    double amount = 0;
    try {
      amount = std::stod(arg_or(call, "amount", "0"));
    } catch (const std::exception&) {
      amount = 0;
    }
    out = {{"from", arg_or(call, "from", "")},
           {"to", arg_or(call, "to", "")},
           {"rate", round2(rate)},
           {"converted", round2(amount * rate)}};
  } else if (name == "list_services") {
    out = {{"environment", arg_or(call, "environment", "production")},
           {"services", {"checkoutservice", "paymentservice", "cartservice", "emailservice"}}};
  } else if (name == "get_service_metrics") {
    out = {{"service", arg_or(call, "service", "")},
           {"error_rate", round2(measure("err", call, 0.0, 7.5))},
           {"p95_latency_ms", round2(measure("lat", call, 40.0, 900.0))}};
  } else if (name == "get_error_logs") {
    static const char* errors[] = {"ConnectionTimeout", "CardDeclined", "UpstreamReset",
                                   "RateLimited", "NullReference"};
    const auto h = fnv1a64(canonical_call(call, ArgMode::with_args));
    out = {{"service", arg_or(call, "service", "")},
           {"top_errors",
            {{{"error", errors[h % 5]}, {"count", 10 + h % 90}},
             {{"error", errors[(h / 5) % 5]}, {"count", 1 + (h / 7) % 10}}}}};
  } else {
    throw ToolResolutionError("unknown tool '" + name + "'");
  }
  return out.dump();
}

// ---------------------------------------------------------------- prompts and parsing

std::string fill_template(std::string tmpl,
                          std::span<const std::pair<std::string, std::string>> values) {
  for (const auto& [key, value] : values) {
    const std::string marker = "{{" + key + "}}";
    for (auto pos = tmpl.find(marker); pos != std::string::npos;
         pos = tmpl.find(marker, pos + value.size()))
      tmpl.replace(pos, marker.size(), value);
  }
  return tmpl;
}

std::vector<std::string> parse_numbered_list(std::string_view text) {
  static const std::regex item(R"(^\s*\**\s*(\d+)\s*[.)]\s*(.*\S)\s*$)");
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    std::smatch m;
    if (std::regex_match(line, m, item)) {
      auto body = m[2].str();
      // Drop markdown emphasis wrapped around the whole item.
      while (body.size() >= 2 && body.front() == '*' && body.back() == '*')
        body = std::string(trim(body.substr(1, body.size() - 2)));
      if (!body.empty()) out.push_back(body);
    }
  }
  return out;
}

namespace {

ChatRequest user_request(std::string prompt, double temperature) {
  ChatRequest r;
  r.messages.push_back({"user", std::move(prompt)});
  r.temperature = temperature;
  return r;
}

GenerationResult request_list(ChatRequest request, std::size_t n, LlmClient& client,
                              const OrchestrationConfig& config, std::string_view role) {
  std::size_t best = 0;
  for (std::size_t attempt = 0; attempt <= config.retry_cap; ++attempt) {
    const auto reply = client.complete(request);
    auto items = parse_numbered_list(reply);
    if (items.size() >= n) {
      items.resize(n);
      return GenerationResult{std::move(items), attempt};
    }
    best = std::max(best, items.size());
    request.messages.push_back({"assistant", reply});
    request.messages.push_back(
        {"user", fill_template(config.prompts.list_retry,
                               std::vector<std::pair<std::string, std::string>>{
                                   {"n", std::to_string(n)}, {"got", std::to_string(items.size())}})});
  }
  throw GenerationError(std::string(role) + " returned at most " + std::to_string(best) + " of " +
                        std::to_string(n) + " questions after " + std::to_string(config.retry_cap) +
                        " retries (short by " + std::to_string(n - best) + ")");
}

}  // namespace

GenerationResult generate_questions(const SeedExample& example, const Trajectory& target,
                                    LlmClient& client, const ToolExecutor& tools,
                                    const OrchestrationConfig& config) {
  std::string responses;
  for (const auto& call : target.calls)
    responses += canonical_call(call, ArgMode::with_args) + " -> " + tools.execute(call) + "\n";
  const std::vector<std::pair<std::string, std::string>> values{
      {"q1", example.question},
      {"t1", render_trajectory(example.trajectory)},
      {"t2", render_trajectory(target)},
      {"t2_responses", responses},
      {"n", std::to_string(config.n_questions)}};
  return request_list(
      user_request(fill_template(config.prompts.investigator, values), config.temperatures.investigator),
      config.n_questions, client, config, "investigator");
}

GenerationResult generate_alternate_questions(const std::string& response, LlmClient& client,
                                              const OrchestrationConfig& config) {
  if (trim(response).empty()) throw ValidationError("cannot reverse-engineer an empty response");
  const std::vector<std::pair<std::string, std::string>> values{
      {"response", response}, {"n", std::to_string(config.n_alternates)}};
  return request_list(user_request(fill_template(config.prompts.reverse_engineer, values),
                                   config.temperatures.reverse_engineer),
                      config.n_alternates, client, config, "reverse engineer");
}

AssistantTurn parse_assistant_reply(std::string_view reply) {
  std::string_view body = trim(reply);
  if (body.starts_with("```")) {
    const auto first_newline = body.find('\n');
    const auto closing = body.rfind("```");
    if (first_newline != std::string_view::npos && closing > first_newline)
      body = trim(body.substr(first_newline + 1, closing - first_newline - 1));
  }
  AssistantTurn turn;
  const auto j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_object()) {
    const auto calls = j.find("tool_calls");
    if (calls != j.end() && calls->is_array() && !calls->empty()) {
      turn.calls = parse_trajectory(calls->dump()).calls;
      return turn;
    }
  }
  turn.final_answer = std::string(trim(reply));
  return turn;
}

AgentRun answer_question(const std::string& question, LlmClient& client, const ToolExecutor& tools,
                         const OrchestrationConfig& config) {
  ChatRequest request;
  request.tools = tools.tools();
  std::string tool_list;
  for (const auto& t : request.tools) tool_list += "- " + t.name + ": " + t.description + "\n";
  request.system_prompt = fill_template(config.prompts.assistant_system,
                                        std::vector<std::pair<std::string, std::string>>{{"tools", tool_list}});
  request.temperature = config.temperatures.assistant;
  request.messages.push_back({"user", question});

  AgentRun run{question, {}, {}, {}};
  for (std::size_t tool_turns = 0;; ++tool_turns) {
    const auto reply = client.complete(request);
    auto turn = parse_assistant_reply(reply);
    if (turn.calls.empty()) {
      run.response = std::move(turn.final_answer);
      return run;
    }
    if (tool_turns == config.step_cap)
      throw StepCapError("assistant did not finish within " + std::to_string(config.step_cap) +
                             " tool steps",
                         run.trajectory);
    std::string results = config.prompts.tool_results_prefix;
    for (auto& call : turn.calls) {
      results += canonical_call(call, ArgMode::with_args) + " -> " + tools.execute(call) + "\n";
      run.trajectory.calls.push_back(std::move(call));
    }
    run.transcript.push_back(reply);
    request.messages.push_back({"assistant", reply});
    request.messages.push_back({"user", results});
  }
}

MostCommonTrajectory most_common_trajectory(std::span<const AgentRun> runs, ArgMode mode,
                                            std::uint64_t seed) {
  if (runs.empty()) throw ValidationError("most common trajectory of zero runs");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < runs.size(); ++i)
    groups[canonical_serialize(runs[i].trajectory, mode)].push_back(i);

  // Map order is ascending serialization, so the first largest group wins ties.
  const std::vector<std::size_t>* winner = nullptr;
  for (const auto& [key, members] : groups)
    if (winner == nullptr || members.size() > winner->size()) winner = &members;

  Rng rng(seed);
  const auto pick = (*winner)[static_cast<std::size_t>(rng.below(winner->size()))];
  return MostCommonTrajectory{runs[winner->front()].trajectory, runs[pick].response, winner->size(),
                              pick};
}

MostCommonTrajectory run_mct(const std::string& question, LlmClient& client,
                             const ToolExecutor& tools, const OrchestrationConfig& config,
                             std::uint64_t seed) {
  std::vector<std::optional<AgentRun>> slots(config.n_runs);
  std::vector<std::string> errors(config.n_runs);
  parallel_for(config.n_runs, config.concurrency, [&](std::size_t i) {
    try {
      slots[i] = answer_question(question, client, tools, config);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  std::vector<AgentRun> runs;
  for (auto& s : slots)
    if (s) runs.push_back(std::move(*s));
  // Canonical order, so scheduling of concurrent runs cannot affect the result.
  std::sort(runs.begin(), runs.end(), [](const AgentRun& a, const AgentRun& b) {
    const auto ka = canonical_serialize(a.trajectory, ArgMode::with_args);
    const auto kb = canonical_serialize(b.trajectory, ArgMode::with_args);
    return ka != kb ? ka < kb : a.response < b.response;
  });
  if (runs.empty())
    throw GenerationError("all " + std::to_string(config.n_runs) + " runs failed for question '" +
                          question + "': " + errors.front());
  return most_common_trajectory(runs, config.mct_mode, seed);
}

VerificationCase build_verification_case(const QuestionRecord& record, LlmClient& client,
                                         const ToolExecutor& tools,
                                         const OrchestrationConfig& config) {
  return build_verification_case(record, client, client, tools, config);
}

VerificationCase build_verification_case(const QuestionRecord& record, LlmClient& reverse_client,
                                         LlmClient& assistant_client, const ToolExecutor& tools,
                                         const OrchestrationConfig& config) {
  if (!record.response || trim(*record.response).empty())
    throw ValidationError("record '" + record.id + "' has no response to reverse-engineer");

  const auto aqs = generate_alternate_questions(*record.response, reverse_client, config).questions;
  std::vector<std::optional<AgentRun>> runs(aqs.size());
  std::vector<std::string> errors(aqs.size());
  parallel_for(aqs.size(), config.concurrency, [&](std::size_t i) {
    for (std::size_t attempt = 0; attempt <= config.retry_cap && !runs[i]; ++attempt) {
      try {
        runs[i] = answer_question(aqs[i], assistant_client, tools, config);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  });

  VerificationCase c{record.id, record.question, record.label, record.trajectory, *record.response, {}};
  std::optional<std::size_t> first_failure;
  for (std::size_t i = 0; i < aqs.size(); ++i) {
    if (runs[i]) c.alternates.push_back(Alternate{aqs[i], runs[i]->trajectory, runs[i]->response});
    else if (!first_failure) first_failure = i;
  }
  const std::size_t required = config.min_alternates == 0 ? config.n_alternates : config.min_alternates;
  if (c.alternates.size() < required) {
    const auto i = first_failure.value_or(0);
    throw CaseAssemblyError("record '" + record.id + "': alternate question " + std::to_string(i) +
                                " failed after " + std::to_string(config.retry_cap + 1) +
                                " attempts: " + errors[i],
                            i);
  }
  return c;
}

// ---------------------------------------------------------------- judge

namespace {

constexpr std::string_view kIncorrectLabel =
    "0: Incorrect - the trajectory makes incorrect calls or makes assumptions beyond the "
    "question requirements.";
constexpr std::string_view kCorrectLabel =
    "1: Correct - all steps make sense and the overall trajectory takes into account all of the "
    "user requirements.";

void check_exemplars(const std::vector<JudgeExemplar>& exemplars) {
  std::size_t correct = 0, incorrect = 0;
  for (const auto& e : exemplars) (e.label == 1 ? correct : incorrect) += 1;
  if (exemplars.size() != 2 || correct != 1 || incorrect != 1)
    throw ValidationError("judge needs exactly one correct and one incorrect exemplar");
}

}  // namespace

std::string build_judge_prompt(const QuestionRecord& record, const JudgeOptions& options) {
  check_exemplars(options.exemplars);
  const bool incorrect_first = options.label_order == LabelOrder::incorrect_first;
  std::ostringstream p;
  p << "Given a user question and the trajectory of tool calls an AI assistant made to answer "
       "it, decide whether the trajectory is correct.\n\n"
    << "Labels:\n"
    << (incorrect_first ? kIncorrectLabel : kCorrectLabel) << "\n"
    << (incorrect_first ? kCorrectLabel : kIncorrectLabel) << "\n\n"
    << "First explain your reasoning. Then end with a final line of the form "
       "\"Final score: <label>\".\n";

  // Correct example first regardless of label order.
  std::vector<const JudgeExemplar*> ordered;
  for (int label : {1, 0})
    for (const auto& e : options.exemplars)
      if (e.label == label) ordered.push_back(&e);
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    p << "\nExample " << (i + 1) << ":\n"
      << "Question: " << ordered[i]->question << "\n"
      << "Trajectory: " << render_trajectory(ordered[i]->trajectory) << "\n"
      << "Final score: " << ordered[i]->label << "\n";
  }
  p << "\nNow evaluate:\n"
    << "Question: " << record.question << "\n"
    << "Trajectory: " << render_trajectory(record.trajectory) << "\n";
  return p.str();
}

std::optional<JudgeVerdict> parse_judge_output(std::string_view output) {
  static const std::regex score(R"(final\s*score\W*([01])(?![0-9]))", std::regex::icase);
  std::vector<std::string> lines;
  std::istringstream in{std::string(output)};
  for (std::string line; std::getline(in, line);) lines.push_back(line);

  for (std::size_t i = lines.size(); i-- > 0;) {
    std::smatch m;
    if (!std::regex_search(lines[i], m, score)) continue;
    std::string rationale;
    for (std::size_t k = 0; k < i; ++k) rationale += lines[k] + "\n";
    // Text on the score line ahead of the marker is also rationale.
    rationale += lines[i].substr(0, static_cast<std::size_t>(m.position(0)));
    return JudgeVerdict{m[1].str() == "1" ? 1 : 0, std::string(trim(rationale)), 0};
  }
  return std::nullopt;
}

JudgeVerdict judge_trajectory(const QuestionRecord& record, LlmClient& client,
                              const JudgeOptions& options) {
  ChatRequest request = user_request(build_judge_prompt(record, options), options.temperature);
  if (options.system_prompt) request.system_prompt = std::string(kJudgeSystemPrompt);

  std::string raw;
  for (std::size_t attempt = 0; attempt <= options.max_reasks; ++attempt) {
    raw = client.complete(request);
    if (auto verdict = parse_judge_output(raw)) {
      verdict->attempts = attempt + 1;
      return *verdict;
    }
    request.messages.push_back({"assistant", raw});
    request.messages.push_back(
        {"user", "Your reply has no score line. End with exactly \"Final score: 0\" or "
                 "\"Final score: 1\"."});
  }
  throw JudgeParseError("judge output for '" + record.id + "' has no final score after " +
                            std::to_string(options.max_reasks) + " re-asks",
                        raw);
}

}  // namespace magv
