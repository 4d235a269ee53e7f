// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "magv/error.hpp"
#include "magv_app/config.hpp"

namespace magv::app {

/// Named arguments of a command: file paths such as
/// {"questions": "out/questions.jsonl"} plus plain options.
using FileArgs = std::map<std::string, std::string>;

/// One command's file contract.
struct StageSpec {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> optional_inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> options;
  std::string summary;
};

/// Every command, in pipeline order first.
const std::vector<StageSpec>& stage_specs();
const StageSpec& stage_spec(const std::string& command);

/// The stages `pipeline` chains.
const std::vector<std::string>& pipeline_stages();

/// File arguments `pipeline` uses for each stage: intermediates live in
/// `out_dir`; seeds and labels come from the config unless given.
std::map<std::string, FileArgs> pipeline_files(const PipelineConfig& config, const FileArgs& overrides = {});

/// A stage failure, tagged with the stage name and the library error kind.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, std::string kind, const std::string& message)
      : std::runtime_error(message), stage_(std::move(stage)), kind_(std::move(kind)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string stage_;
  std::string kind_;
};

/// Runs one command (including "pipeline"). Missing required files or
/// failures surface as StageError naming the stage.
void run_command(const std::string& command, const PipelineConfig& config, const FileArgs& files);

/// Human-readable stage graph for `command` with its resolved files.
std::string describe_plan(const std::string& command, const PipelineConfig& config, const FileArgs& files);

/// Reads "id,label" rows.
std::map<std::string, int> read_labels(const std::string& path);

}  // namespace magv::app
