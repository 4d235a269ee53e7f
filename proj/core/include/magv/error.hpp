// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace magv {

enum class ErrorKind {
  parse,
  validation,
  capacity,
  provider,
  transport,
  generation,
  step_cap,
  tool_resolution,
  judge_parse,
  case_assembly,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base of every exception thrown by the library. The kind lets callers
/// (notably the CLI) report a stable category without RTTI.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error(ErrorKind::parse, message) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::validation, message) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& message)
      : Error(ErrorKind::capacity, message) {}
};

class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& message)
      : Error(ErrorKind::provider, message) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message)
      : Error(ErrorKind::transport, message) {}
};

class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& message)
      : Error(ErrorKind::generation, message) {}
};

class ToolResolutionError : public Error {
 public:
  explicit ToolResolutionError(const std::string& message)
      : Error(ErrorKind::tool_resolution, message) {}
};

class JudgeParseError : public Error {
 public:
  JudgeParseError(const std::string& message, std::string raw_output)
      : Error(ErrorKind::judge_parse, message), raw_output_(std::move(raw_output)) {}

  const std::string& raw_output() const noexcept { return raw_output_; }

 private:
  std::string raw_output_;
};

class CaseAssemblyError : public Error {
 public:
  CaseAssemblyError(const std::string& message, std::size_t alternate_index)
      : Error(ErrorKind::case_assembly, message), alternate_index_(alternate_index) {}

  std::size_t alternate_index() const noexcept { return alternate_index_; }

 private:
  std::size_t alternate_index_;
};

}  // namespace magv
