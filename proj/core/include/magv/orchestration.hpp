// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "magv/error.hpp"
#include "magv/llm_client.hpp"
#include "magv/trajectory.hpp"
#include "magv/verification_case.hpp"

namespace magv {

/// Resolves tool calls to response text. Implementations are safe for
/// concurrent use.
class ToolExecutor {
 public:
  virtual ~ToolExecutor() = default;
  /// Throws ToolResolutionError for unknown tools.
  virtual std::string execute(const ToolCall& call) const = 0;
  virtual std::vector<ToolSpec> tools() const = 0;
};

/// Offline tools with canned, argument-derived responses: weather, currency
/// conversion, and service metrics / error logs / service listing.
class FixtureToolExecutor final : public ToolExecutor {
 public:
  std::string execute(const ToolCall& call) const override;
  std::vector<ToolSpec> tools() const override;
};

/// A run that hit the step cap; carries the calls made so far.
class StepCapError : public Error {
 public:
  StepCapError(const std::string& message, Trajectory partial)
      : Error(ErrorKind::step_cap, message), partial_(std::move(partial)) {}

  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

/// Prompt templates. Placeholders in double braces are substituted verbatim.
struct PromptTemplates {
  /// {{q1}} {{t1}} {{t2}} {{t2_responses}} {{n}}
  std::string investigator =
      "You write realistic user questions for an AI assistant that answers by calling tools.\n\n"
      "Here is an example question and the tool calls that answered it.\n"
      "Example question: {{q1}}\n"
      "Example trajectory: {{t1}}\n\n"
      "Here is another trajectory that was executed, with the tool responses it produced.\n"
      "Trajectory: {{t2}}\n"
      "Tool responses:\n{{t2_responses}}\n\n"
      "Study the tool responses and write {{n}} new questions, similar in style to the example "
      "question, that the assistant would need tools like these to answer.\n"
      "Return exactly {{n}} questions as a numbered list, one per line (1. ..., 2. ...), and "
      "nothing else.";
  /// {{response}} {{n}}
  std::string reverse_engineer =
      "Below is a response an AI assistant gave to a user.\n\n"
      "Response:\n{{response}}\n\n"
      "Write {{n}} alternate questions that together capture all of the main points of this "
      "response, such that answering them would produce the same information.\n"
      "Return exactly {{n}} questions as a numbered list, one per line (1. ..., 2. ...), and "
      "nothing else.";
  /// {{tools}}
  std::string assistant_system =
      "You are an assistant that answers questions by calling tools.\n"
      "Available tools:\n{{tools}}\n"
      "To call tools, reply with only a JSON object of the form "
      "{\"tool_calls\": [{\"tool\": \"<name>\", \"args\": {\"<arg>\": \"<value>\"}}]}.\n"
      "When you have enough information, reply with the final answer as plain text.";
  /// {{n}} {{got}}
  std::string list_retry =
      "Your reply contained {{got}} parseable questions. Return exactly {{n}} questions as a "
      "numbered list, one per line, and nothing else.";
  std::string tool_results_prefix = "Tool results:\n";
};

struct RoleTemperatures {
  double investigator = 1.0;
  double assistant = 1.0;
  double reverse_engineer = 0.0;
  double judge = 0.0;
};

struct OrchestrationConfig {
  std::size_t n_questions = 10;
  std::size_t n_alternates = 3;
  /// Alternates that must succeed for a case to be assembled; 0 means all.
  std::size_t min_alternates = 0;
  std::size_t n_runs = 5;
  std::size_t step_cap = 10;
  std::size_t retry_cap = 2;
  /// Concurrent agent runs (MCT trials, alternate answers).
  std::size_t concurrency = 4;
  ArgMode mct_mode = ArgMode::with_args;
  std::uint64_t seed = 1;
  RoleTemperatures temperatures;
  PromptTemplates prompts;
};

/// Replaces every "{{key}}" in `tmpl`.
std::string fill_template(std::string tmpl,
                          std::span<const std::pair<std::string, std::string>> values);

/// Items of a numbered list ("1. text" or "1) text"), in order.
std::vector<std::string> parse_numbered_list(std::string_view text);

struct GenerationResult {
  std::vector<std::string> questions;
  std::size_t retries = 0;
};

/// One in-context example: a question and the trajectory that answered it.
struct SeedExample {
  std::string question;
  Trajectory trajectory;
};

/// Investigator role: executes `target` with the tool executor and asks for
/// n questions in the style of `example`. Short replies are re-asked up to
/// retry_cap times; throws GenerationError reporting the shortfall after that.
GenerationResult generate_questions(const SeedExample& example, const Trajectory& target,
                                    LlmClient& client, const ToolExecutor& tools,
                                    const OrchestrationConfig& config);

struct AgentRun {
  std::string question;
  Trajectory trajectory;
  std::string response;
  /// Raw model replies that carried tool calls, in order.
  std::vector<std::string> transcript;
};

/// Parsed assistant reply: tool calls, or a final answer when there are none.
struct AssistantTurn {
  std::vector<ToolCall> calls;
  std::string final_answer;
};

/// Replies that are a JSON object with a non-empty "tool_calls" list (code
/// fences allowed) are tool turns; anything else is the final answer.
AssistantTurn parse_assistant_reply(std::string_view reply);

/// Assistant role: loops model <-> tools until a final answer. Throws
/// StepCapError after step_cap tool turns and ToolResolutionError for
/// unknown tools.
AgentRun answer_question(const std::string& question, LlmClient& client, const ToolExecutor& tools,
                         const OrchestrationConfig& config);

struct MostCommonTrajectory {
  Trajectory trajectory;
  std::string response;
  std::size_t group_size = 0;
  std::size_t run_index = 0;  // run whose response was sampled
};

/// Groups runs by trajectory equality in `mode`; the largest group wins,
/// ties going to the smallest canonical serialization. The response is drawn
/// from the winning group with `seed`. Throws ValidationError on no runs.
MostCommonTrajectory most_common_trajectory(std::span<const AgentRun> runs, ArgMode mode,
                                            std::uint64_t seed);

/// Answers `question` n_runs times and reduces to the most common
/// trajectory. Failed runs are skipped and the rest are put in canonical
/// order before reduction; throws when every run fails.
MostCommonTrajectory run_mct(const std::string& question, LlmClient& client,
                             const ToolExecutor& tools, const OrchestrationConfig& config,
                             std::uint64_t seed);

/// Reverse-engineer role. Throws ValidationError for an empty response.
GenerationResult generate_alternate_questions(const std::string& response, LlmClient& client,
                                              const OrchestrationConfig& config);

/// Generates alternate questions from the record's response and answers
/// each. Each alternate run is retried up to retry_cap times; throws
/// CaseAssemblyError naming the first failing alternate when fewer than
/// min_alternates succeed.
VerificationCase build_verification_case(const QuestionRecord& record, LlmClient& client,
                                         const ToolExecutor& tools,
                                         const OrchestrationConfig& config);

/// Same, with separate clients for the reverse-engineer and assistant roles.
VerificationCase build_verification_case(const QuestionRecord& record, LlmClient& reverse_client,
                                         LlmClient& assistant_client, const ToolExecutor& tools,
                                         const OrchestrationConfig& config);

enum class LabelOrder { incorrect_first, correct_first };

struct JudgeExemplar {
  std::string question;
  Trajectory trajectory;
  int label = 0;
};

struct JudgeOptions {
  bool system_prompt = true;
  LabelOrder label_order = LabelOrder::incorrect_first;
  /// Exactly one correct and one incorrect example.
  std::vector<JudgeExemplar> exemplars;
  double temperature = 0.0;
  std::size_t max_reasks = 2;
};

inline constexpr std::string_view kJudgeSystemPrompt = "You are a helpful AI Assistant.";

/// The judge's user prompt for `record`. Throws ValidationError unless the
/// exemplars are one correct and one incorrect pair.
std::string build_judge_prompt(const QuestionRecord& record, const JudgeOptions& options);

struct JudgeVerdict {
  int label = 0;
  std::string rationale;
  std::size_t attempts = 0;
};

/// Parses "<rationale> ... Final score: 0|1"; the last score line wins.
std::optional<JudgeVerdict> parse_judge_output(std::string_view output);

/// LLM-as-a-judge baseline. Throws JudgeParseError (with the raw output)
/// when no score line appears after max_reasks re-asks.
JudgeVerdict judge_trajectory(const QuestionRecord& record, LlmClient& client,
                              const JudgeOptions& options);

}  // namespace magv
