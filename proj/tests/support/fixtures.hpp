// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic data shared by unit and acceptance tests.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "magv/evaluation.hpp"
#include "magv/random.hpp"
#include "magv/trajectory.hpp"
#include "magv/verification_case.hpp"

namespace fixture {

inline magv::ToolCall call(const std::string& name,
                           std::vector<std::pair<std::string, std::string>> args = {}) {
  return magv::make_tool_call(name, std::move(args));
}

inline magv::Trajectory chain(std::initializer_list<std::string> names) {
  magv::Trajectory t;
  for (const auto& n : names) t.calls.push_back(call(n));
  return t;
}

// Every sequence of length <= max_len over `alphabet`.
inline std::vector<std::vector<std::string>> all_sequences(const std::vector<std::string>& alphabet,
                                                           std::size_t max_len) {
  std::vector<std::vector<std::string>> out{{}};
  std::size_t begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i)
      for (const auto& s : alphabet) {
        auto next = out[i];
        next.push_back(s);
        out.push_back(std::move(next));
      }
    begin = end;
  }
  return out;
}

inline magv::Trajectory from_names(const std::vector<std::string>& names) {
  magv::Trajectory t;
  for (const auto& n : names) t.calls.push_back(call(n));
  return t;
}

// Random trajectory with 0..max_len calls drawn from `tools`, each carrying
// 0..2 arguments with small value ranges so collisions are common.
inline magv::Trajectory random_trajectory(magv::Rng& rng, const std::vector<std::string>& tools,
                                          std::size_t max_len) {
  magv::Trajectory t;
  const auto len = rng.below(max_len + 1);
  for (std::uint64_t i = 0; i < len; ++i) {
    std::vector<std::pair<std::string, std::string>> args;
    const auto n_args = rng.below(3);
    for (std::uint64_t a = 0; a < n_args; ++a)
      args.emplace_back(std::string(1, static_cast<char>('p' + a)), std::to_string(rng.below(3)));
    t.calls.push_back(call(tools[rng.below(tools.size())], std::move(args)));
  }
  return t;
}

inline magv::ToolCall service_call(magv::Rng& rng, const std::string& tool) {
  static const char* services[] = {"checkout", "payment", "cart", "email", "search"};
  return call(tool, {{"service", services[rng.below(5)]}, {"window", std::to_string(rng.below(24))}});
}

// 40 labeled cases (26 incorrect, 14 correct) with three alternates each.
// Correct cases have alternates within one call edit of the base; incorrect
// ones have alternates built from a disjoint tool set, at least three edits
// away.
inline std::vector<magv::VerificationCase> separable_cases(std::uint64_t seed = 7) {
  magv::Rng rng(seed);
  const std::vector<std::string> near_tools{"get_service_metrics", "get_error_logs", "list_services",
                                            "get_current_weather"};
  const std::vector<std::string> far_tools{"convert_currency", "lookup_invoice", "send_email"};
  std::vector<magv::VerificationCase> cases;
  for (int i = 0; i < 40; ++i) {
    const int label = i % 3 == 2 ? 1 : 0;
    magv::VerificationCase c;
    c.id = "case-" + std::to_string(i);
    c.base_question = "Question " + std::to_string(i) + " about service health";
    c.label = label;
    const auto len = 3 + rng.below(3);
    for (std::uint64_t k = 0; k < len; ++k)
      c.base_trajectory.calls.push_back(service_call(rng, near_tools[rng.below(near_tools.size())]));
    c.base_response = "response " + std::to_string(i);
    for (int a = 0; a < 3; ++a) {
      magv::Alternate alt;
      alt.question = "alternate " + std::to_string(a);
      alt.response = "alt response";
      if (label == 1) {
        alt.trajectory = c.base_trajectory;
        switch (rng.below(4)) {
          case 0: break;
          case 1: alt.trajectory.calls.pop_back(); break;
          case 2: alt.trajectory.calls.push_back(service_call(rng, near_tools[0])); break;
          default:
            alt.trajectory.calls[rng.below(alt.trajectory.calls.size())] =
                service_call(rng, near_tools[rng.below(near_tools.size())]);
        }
      } else {
        const auto alt_len = std::max<std::uint64_t>(3, len - rng.below(2));
        for (std::uint64_t k = 0; k < alt_len; ++k)
          alt.trajectory.calls.push_back(service_call(rng, far_tools[rng.below(far_tools.size())]));
      }
      c.alternates.push_back(std::move(alt));
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

// Samples whose EDIT column (index 1) separates the classes while the other
// five columns are uniform noise on a comparable scale.
inline std::vector<magv::Sample> edit_informative_samples(std::uint64_t seed = 11, int n = 40) {
  magv::Rng rng(seed);
  auto noise = [&] { return static_cast<double>(rng.below(1000)) / 200.0; };
  std::vector<magv::Sample> out;
  for (int i = 0; i < n; ++i) {
    const int label = i % 3 == 2 ? 1 : 0;
    magv::Sample s;
    s.id = "s" + std::to_string(i);
    s.question = "q" + std::to_string(i);
    s.label = label;
    const double edit = label == 1 ? static_cast<double>(rng.below(2))
                                   : 3.0 + static_cast<double>(rng.below(3));
    s.trajectory_features = {noise(), edit, noise(), noise(), noise(), noise()};
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<int> labels_30_15() {
  std::vector<int> labels;
  for (int i = 0; i < 45; ++i) labels.push_back(i % 3 == 1 ? 1 : 0);
  return labels;
}

}  // namespace fixture
