// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "magv/trajectory.hpp"

namespace magv {

/// An alternate question (AQ) and the trajectory (AT) the assistant took to
/// answer it.
struct Alternate {
  std::string question;
  Trajectory trajectory;
  std::string response;

  bool operator==(const Alternate&) const = default;
};

/// A base question with its annotated base trajectory (BT) and the
/// alternates reverse-engineered from its response. Pairing each AQ with its
/// AT in one struct keeps |AQs| == |ATs| structurally.
struct VerificationCase {
  std::string id;
  std::string base_question;
  std::optional<int> label;
  Trajectory base_trajectory;
  std::string base_response;
  std::vector<Alternate> alternates;

  bool operator==(const VerificationCase&) const = default;
};

// Case files hold one JSON object per line:
// {"id", "question", "label"?, "trajectory", "response",
//  "alternates": [{"question", "trajectory", "response"}]}
VerificationCase parse_verification_case(std::string_view line);
std::string render_verification_case(const VerificationCase& c);

std::vector<VerificationCase> read_cases(const std::string& path);
void write_cases(const std::string& path, const std::vector<VerificationCase>& cases);

}  // namespace magv
