// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace magv {

/// Whether tool arguments take part in rendering and comparison.
enum class ArgMode { with_args, without_args };

std::string_view to_string(ArgMode mode) noexcept;
ArgMode arg_mode_from_string(std::string_view text);

/// One tool invocation. Argument names are unique and kept in byte order;
/// values are stored verbatim (numbers and booleans keep their textual form).
struct ToolCall {
  std::string name;
  std::map<std::string, std::string> args;

  bool operator==(const ToolCall&) const = default;
};

/// Ordered tool calls made while answering one question. May be empty when
/// the agent answered without tools.
struct Trajectory {
  std::vector<ToolCall> calls;

  bool empty() const noexcept { return calls.empty(); }
  std::size_t size() const noexcept { return calls.size(); }

  bool operator==(const Trajectory&) const = default;
};

struct QuestionRecord {
  std::string id;
  std::string question;
  std::optional<int> label;  // 0 = incorrect, 1 = correct
  Trajectory trajectory;
  std::optional<std::string> response;

  bool operator==(const QuestionRecord&) const = default;
};

/// Validates and normalizes a call: trims the name, rejects empty names and
/// names containing whitespace.
ToolCall make_tool_call(std::string_view name,
                        std::vector<std::pair<std::string, std::string>> args = {});

/// Parses a JSON list of {"tool": name, "args": {k: v, ...}} entries.
/// Throws ParseError (naming the offending index) for malformed entries and
/// ValidationError for duplicate argument names.
Trajectory parse_trajectory(std::string_view raw);

/// Renders the external list schema; parse_trajectory(render_trajectory(t)) == t.
std::string render_trajectory(const Trajectory& t);

/// Canonical rendering of one call, e.g. "f(a=1,b=2)" or "f".
std::string canonical_call(const ToolCall& call, ArgMode mode);

/// Per-call canonical tokens, in call order.
std::vector<std::string> canonical_tokens(const Trajectory& t, ArgMode mode);

/// Calls joined by '|'. Separator characters inside names and values are
/// backslash-escaped so distinct trajectories never collide.
std::string canonical_serialize(const Trajectory& t, ArgMode mode);

Trajectory strip_arguments(const Trajectory& t);

bool trajectories_equal(const Trajectory& a, const Trajectory& b, ArgMode mode);

/// Argument value as compared: surrounding whitespace trimmed.
std::string_view normalized_value(std::string_view value) noexcept;

// Dataset lines: {"id", "question", "label"?, "trajectory": [...], "response"?}.
QuestionRecord parse_question_record(std::string_view line);
std::string render_question_record(const QuestionRecord& record);

std::vector<QuestionRecord> read_dataset(const std::string& path);
void write_dataset(const std::string& path, const std::vector<QuestionRecord>& records);

}  // namespace magv
