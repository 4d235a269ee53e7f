// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "magv/embedding.hpp"
#include "magv/trajectory.hpp"
#include "magv/verification_case.hpp"

namespace magv {

/// Similarity between a base trajectory (BT) and one alternate (AT).
struct TrajectoryFeatureSet {
  double em = 0;     // exact match, 0 or 1
  double edit = 0;   // call-level Levenshtein distance
  double gedit = 0;  // path-graph edit distance
  double ss = 0;     // cosine similarity of embedded serializations
  double ao = 0;     // argument-overlap F1
  double lcss = 0;   // common-starting-sequence F1

  bool operator==(const TrajectoryFeatureSet&) const = default;
};

enum class Aggregation { mean, concat };

std::string_view to_string(Aggregation a) noexcept;
Aggregation aggregation_from_string(std::string_view text);

/// How argument_overlap pairs arguments between BT and AT.
enum class ArgAlignment {
  prefix,  // position-wise over the longest prefix whose tool names match
  bag,     // multiset of name=value pairs over the whole trajectory
};

std::string_view to_string(ArgAlignment a) noexcept;
ArgAlignment arg_alignment_from_string(std::string_view text);

inline constexpr std::size_t kDefaultGedCap = 15;

struct FeatureOptions {
  ArgMode mode = ArgMode::with_args;
  Aggregation aggregation = Aggregation::mean;
  ArgAlignment ao_alignment = ArgAlignment::prefix;
  std::size_t ged_cap = kDefaultGedCap;
};

/// Column names of the trajectory features, in vector order:
/// em, edit, gedit, ss, ao, lcss (ao only with arguments).
std::vector<std::string> feature_names(ArgMode mode);

/// Column names of compute_case_features output. Concat mode suffixes each
/// name with the 1-based alternate index.
std::vector<std::string> case_feature_names(const FeatureOptions& options,
                                            std::size_t n_alternates);

int exact_match(const Trajectory& bt, const Trajectory& at, ArgMode mode);

/// Levenshtein distance over token sequences, unit costs.
std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b);

/// Levenshtein distance where each call's canonical rendering is one symbol.
std::size_t edit_distance(const Trajectory& bt, const Trajectory& at, ArgMode mode);

/// Exact edit distance between the directed path graphs whose nodes are the
/// token sequences and whose edges join consecutive tokens. Unit costs for
/// node insert/delete/relabel and edge insert/delete. Throws CapacityError
/// when either sequence is longer than `cap`.
std::size_t path_graph_edit_distance(std::span<const std::string> a,
                                     std::span<const std::string> b,
                                     std::size_t cap = kDefaultGedCap);

double graph_edit_distance(const Trajectory& bt, const Trajectory& at, ArgMode mode,
                           std::size_t cap = kDefaultGedCap);

/// Cosine similarity of the embedded canonical serializations. 1 when the
/// serializations are identical, 0 when exactly one trajectory is empty or
/// either embedding has zero norm.
double semantic_similarity(const Trajectory& bt, const Trajectory& at, ArgMode mode,
                           const EmbeddingProvider& embedder);

/// F1 of shared name=value arguments: 2PR/(P+R) with P = O/|args(AT)| and
/// R = O/|args(BT)|; 0 when nothing overlaps.
double argument_overlap(const Trajectory& bt, const Trajectory& at,
                        ArgAlignment alignment = ArgAlignment::prefix);

/// F1 of the longest common starting run of calls. Both empty -> 1; exactly
/// one empty -> 0.
double lcss(const Trajectory& bt, const Trajectory& at, ArgMode mode);

TrajectoryFeatureSet compute_features(const Trajectory& bt, const Trajectory& at,
                                      const FeatureOptions& options,
                                      const EmbeddingProvider& embedder);

/// Flattens a feature set in column order for `mode`.
std::vector<double> to_vector(const TrajectoryFeatureSet& f, ArgMode mode);

/// Features between the case's BT and each AT, aggregated per options.
/// Throws ValidationError when the case has no alternates.
std::vector<double> compute_case_features(const VerificationCase& c,
                                          const FeatureOptions& options,
                                          const EmbeddingProvider& embedder);

/// One row of an exported feature table.
struct FeatureRow {
  std::string id;
  std::optional<int> label;
  std::vector<double> values;

  bool operator==(const FeatureRow&) const = default;
};

/// Features for every case, computed on up to `workers` threads. Rows keep
/// the input order.
std::vector<FeatureRow> compute_feature_rows(std::span<const VerificationCase> cases,
                                             const FeatureOptions& options,
                                             const EmbeddingProvider& embedder,
                                             std::size_t workers = 1);

/// Comma-separated table: header "id,label,<feature columns>", one row per
/// case, values in shortest round-trip form, missing labels empty.
std::string render_feature_table(std::span<const std::string> columns,
                                 std::span<const FeatureRow> rows);

struct FeatureTable {
  std::vector<std::string> columns;  // feature columns only
  std::vector<FeatureRow> rows;
};

FeatureTable parse_feature_table(std::string_view text);

}  // namespace magv
