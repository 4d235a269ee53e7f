// SPDX-License-Identifier: Apache-2.0

#include "magv/similarity.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "csv.hpp"
#include "magv/error.hpp"
#include "magv/parallel.hpp"
#include "magv/text_features.hpp"

namespace magv {

std::string_view to_string(Aggregation a) noexcept {
  return a == Aggregation::mean ? "mean" : "concat";
}

Aggregation aggregation_from_string(std::string_view text) {
  if (text == "mean") return Aggregation::mean;
  if (text == "concat") return Aggregation::concat;
  throw ValidationError("unknown aggregation '" + std::string(text) + "' (expected mean or concat)");
}

std::string_view to_string(ArgAlignment a) noexcept {
  return a == ArgAlignment::prefix ? "prefix" : "bag";
}

ArgAlignment arg_alignment_from_string(std::string_view text) {
  if (text == "prefix") return ArgAlignment::prefix;
  if (text == "bag") return ArgAlignment::bag;
  throw ValidationError("unknown argument alignment '" + std::string(text) +
                        "' (expected prefix or bag)");
}

std::vector<std::string> feature_names(ArgMode mode) {
  if (mode == ArgMode::with_args) return {"em", "edit", "gedit", "ss", "ao", "lcss"};
  return {"em", "edit", "gedit", "ss", "lcss"};
}

std::vector<std::string> case_feature_names(const FeatureOptions& options,
                                            std::size_t n_alternates) {
  const auto base = feature_names(options.mode);
  if (options.aggregation == Aggregation::mean) return base;
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= n_alternates; ++k)
    for (const auto& n : base) names.push_back(n + "_" + std::to_string(k));
  return names;
}

int exact_match(const Trajectory& bt, const Trajectory& at, ArgMode mode) {
  return trajectories_equal(bt, at, mode) ? 1 : 0;
}

std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b) {
  // Single-row DP over b.
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t edit_distance(const Trajectory& bt, const Trajectory& at, ArgMode mode) {
  const auto a = canonical_tokens(at, mode);
  const auto b = canonical_tokens(bt, mode);
  return levenshtein(a, b);
}

namespace {

/// Branch-and-bound search for the path-graph edit distance.
///
/// With unit costs an optimal edit path maps every node of the shorter path
/// onto a distinct node of the longer one: a deleted node and an inserted
/// node can always be replaced by one relabel (cost <= 1 instead of 2) that
/// never removes a preserved edge. So for |short| = m <= n = |long|:
///
///   cost = (n - m) + relabels + (m - 1) + (n - 1) - 2 * preserved_edges
///
/// where an edge (i, i+1) of the short path is preserved when its endpoints
/// map to (j, j+1). The search assigns short-path nodes in order and prunes
/// with a label-multiset bound on relabels plus an optimistic edge count.
class PathGedSearch {
 public:
  PathGedSearch(std::vector<int> shorter, std::vector<int> longer, int labels)
      : a_(std::move(shorter)),
        b_(std::move(longer)),
        m_(a_.size()),
        n_(b_.size()),
        mapping_(m_, 0),
        used_(n_, false),
        remaining_a_(static_cast<std::size_t>(labels), 0),
        unused_b_(static_cast<std::size_t>(labels), 0) {
    for (int l : a_) ++remaining_a_[static_cast<std::size_t>(l)];
    for (int l : b_) ++unused_b_[static_cast<std::size_t>(l)];
    edges_total_ = (m_ > 0 ? m_ - 1 : 0) + (n_ > 0 ? n_ - 1 : 0);
  }

  std::size_t solve() {
    if (m_ == 0) return n_ + (n_ > 0 ? n_ - 1 : 0);
    best_ = contiguous_upper_bound();
    search(0, 0, 0);
    return best_;
  }

 private:
  // Best cost over mappings of the short path onto a contiguous window.
  std::size_t contiguous_upper_bound() const {
    std::size_t best = SIZE_MAX;
    for (std::size_t offset = 0; offset + m_ <= n_; ++offset) {
      std::size_t relabels = 0;
      for (std::size_t i = 0; i < m_; ++i) relabels += a_[i] != b_[i + offset] ? 1 : 0;
      best = std::min(best, total(relabels, m_ - 1));
    }
    return best;
  }

  std::size_t total(std::size_t relabels, std::size_t preserved) const {
    return (n_ - m_) + relabels + edges_total_ - 2 * preserved;
  }

  std::size_t lower_bound(std::size_t next, std::size_t relabels, std::size_t preserved) const {
    std::size_t matchable = 0;
    for (std::size_t l = 0; l < remaining_a_.size(); ++l)
      matchable += std::min(remaining_a_[l], unused_b_[l]);
    const std::size_t left = m_ - next;
    const std::size_t open_edges = next == 0 ? m_ - 1 : m_ - next;
    return total(relabels + (left - matchable), preserved + open_edges);
  }

  void search(std::size_t i, std::size_t relabels, std::size_t preserved) {
    if (i == m_) {
      best_ = std::min(best_, total(relabels, preserved));
      return;
    }
    if (lower_bound(i, relabels, preserved) >= best_) return;

    // Candidate order: continue the previous run, then equal labels, then the rest.
    candidates_.clear();
    const std::size_t follow = i > 0 ? mapping_[i - 1] + 1 : SIZE_MAX;
    if (follow < n_ && !used_[follow]) candidates_.push_back(follow);
    for (std::size_t j = 0; j < n_; ++j)
      if (!used_[j] && j != follow && b_[j] == a_[i]) candidates_.push_back(j);
    for (std::size_t j = 0; j < n_; ++j)
      if (!used_[j] && j != follow && b_[j] != a_[i]) candidates_.push_back(j);
    const std::vector<std::size_t> order = candidates_;

    const auto la = static_cast<std::size_t>(a_[i]);
    --remaining_a_[la];
    for (const std::size_t j : order) {
      const auto lb = static_cast<std::size_t>(b_[j]);
      used_[j] = true;
      --unused_b_[lb];
      mapping_[i] = j;
      const std::size_t keep = (i > 0 && j == mapping_[i - 1] + 1) ? 1 : 0;
      search(i + 1, relabels + (a_[i] != b_[j] ? 1 : 0), preserved + keep);
      ++unused_b_[lb];
      used_[j] = false;
      if (best_ == lower_bound_floor()) break;
    }
    ++remaining_a_[la];
  }

  // No mapping can beat this; used to stop early once reached.
  std::size_t lower_bound_floor() const {
    return (n_ - m_) + edges_total_ - 2 * (m_ > 0 ? m_ - 1 : 0);
  }

  std::vector<int> a_, b_;
  std::size_t m_, n_;
  std::size_t edges_total_ = 0;
  std::vector<std::size_t> mapping_;
  std::vector<bool> used_;
  std::vector<std::size_t> remaining_a_, unused_b_;
  std::vector<std::size_t> candidates_;
  std::size_t best_ = SIZE_MAX;
};

}  // namespace

std::size_t path_graph_edit_distance(std::span<const std::string> a,
                                     std::span<const std::string> b, std::size_t cap) {
  if (a.size() > cap || b.size() > cap)
    throw CapacityError("graph edit distance: trajectory length " +
                        std::to_string(std::max(a.size(), b.size())) + " exceeds the cap of " +
                        std::to_string(cap) + "; raise the GED cap to compute it exactly");

  std::unordered_map<std::string_view, int> ids;
  const auto intern = [&ids](std::span<const std::string> tokens) {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(ids.emplace(t, static_cast<int>(ids.size())).first->second);
    return out;
  };
  auto ia = intern(a);
  auto ib = intern(b);
  const int labels = static_cast<int>(ids.size());
  if (ia.size() > ib.size()) std::swap(ia, ib);
  return PathGedSearch(std::move(ia), std::move(ib), labels).solve();
}

double graph_edit_distance(const Trajectory& bt, const Trajectory& at, ArgMode mode,
                           std::size_t cap) {
  const auto a = canonical_tokens(at, mode);
  const auto b = canonical_tokens(bt, mode);
  return static_cast<double>(path_graph_edit_distance(a, b, cap));
}

double semantic_similarity(const Trajectory& bt, const Trajectory& at, ArgMode mode,
                           const EmbeddingProvider& embedder) {
  const auto sb = canonical_serialize(bt, mode);
  const auto sa = canonical_serialize(at, mode);
  if (sa == sb) return 1.0;
  if (sa.empty() || sb.empty()) return 0.0;
  const auto eb = embedder.embed(sb);
  const auto ea = embedder.embed(sa);
  if (ea.size() != eb.size())
    throw ProviderError("embedding provider returned vectors of different dimension (" +
                        std::to_string(eb.size()) + " vs " + std::to_string(ea.size()) + ")");
  return cosine(eb, ea);
}

namespace {

std::size_t argument_count(const Trajectory& t) {
  std::size_t n = 0;
  for (const auto& c : t.calls) n += c.args.size();
  return n;
}

std::size_t shared_arguments(const ToolCall& x, const ToolCall& y) {
  std::size_t shared = 0;
  for (const auto& [k, v] : x.args) {
    const auto it = y.args.find(k);
    if (it != y.args.end() && normalized_value(it->second) == normalized_value(v)) ++shared;
  }
  return shared;
}

std::size_t prefix_overlap(const Trajectory& bt, const Trajectory& at) {
  std::size_t shared = 0;
  const std::size_t n = std::min(bt.size(), at.size());
  for (std::size_t i = 0; i < n && bt.calls[i].name == at.calls[i].name; ++i)
    shared += shared_arguments(bt.calls[i], at.calls[i]);
  return shared;
}

std::size_t bag_overlap(const Trajectory& bt, const Trajectory& at) {
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& c : bt.calls)
    for (const auto& [k, v] : c.args) ++counts[{k, std::string(normalized_value(v))}];
  std::size_t shared = 0;
  for (const auto& c : at.calls) {
    for (const auto& [k, v] : c.args) {
      auto it = counts.find({k, std::string(normalized_value(v))});
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++shared;
      }
    }
  }
  return shared;
}

}  // namespace

double argument_overlap(const Trajectory& bt, const Trajectory& at, ArgAlignment alignment) {
  const std::size_t overlap =
      alignment == ArgAlignment::prefix ? prefix_overlap(bt, at) : bag_overlap(bt, at);
  if (overlap == 0) return 0.0;
  // 2PR/(P+R) with P = O/|AT args|, R = O/|BT args| reduces to 2O/(|AT|+|BT|).
  const double precision = static_cast<double>(overlap) / static_cast<double>(argument_count(at));
  const double recall = static_cast<double>(overlap) / static_cast<double>(argument_count(bt));
  return 2.0 * precision * recall / (precision + recall);
}

double lcss(const Trajectory& bt, const Trajectory& at, ArgMode mode) {
  if (bt.empty() && at.empty()) return 1.0;
  if (bt.empty() || at.empty()) return 0.0;
  const auto b = canonical_tokens(bt, mode);
  const auto a = canonical_tokens(at, mode);
  const auto [ia, ib] = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
  const auto common = static_cast<double>(ia - a.begin());
  // F1 of prefix precision and recall, in closed form.
  return 2.0 * common / static_cast<double>(a.size() + b.size());
}

TrajectoryFeatureSet compute_features(const Trajectory& bt, const Trajectory& at,
                                      const FeatureOptions& options,
                                      const EmbeddingProvider& embedder) {
  TrajectoryFeatureSet f;
  f.em = exact_match(bt, at, options.mode);
  f.edit = static_cast<double>(edit_distance(bt, at, options.mode));
  f.gedit = graph_edit_distance(bt, at, options.mode, options.ged_cap);
  f.ss = semantic_similarity(bt, at, options.mode, embedder);
  f.ao = options.mode == ArgMode::with_args ? argument_overlap(bt, at, options.ao_alignment) : 0.0;
  f.lcss = lcss(bt, at, options.mode);
  return f;
}

std::vector<double> to_vector(const TrajectoryFeatureSet& f, ArgMode mode) {
  if (mode == ArgMode::with_args) return {f.em, f.edit, f.gedit, f.ss, f.ao, f.lcss};
  return {f.em, f.edit, f.gedit, f.ss, f.lcss};
}

std::vector<double> compute_case_features(const VerificationCase& c,
                                          const FeatureOptions& options,
                                          const EmbeddingProvider& embedder) {
  if (c.alternates.empty())
    throw ValidationError("case '" + c.id + "' has no alternate trajectories");

  std::vector<std::vector<double>> per_alternate;
  per_alternate.reserve(c.alternates.size());
  for (const auto& alt : c.alternates)
    per_alternate.push_back(
        to_vector(compute_features(c.base_trajectory, alt.trajectory, options, embedder),
                  options.mode));

  if (options.aggregation == Aggregation::concat) {
    std::vector<double> out;
    for (const auto& v : per_alternate) out.insert(out.end(), v.begin(), v.end());
    return out;
  }
  std::vector<double> mean(per_alternate.front().size(), 0.0);
  for (const auto& v : per_alternate)
    for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
  for (double& x : mean) x /= static_cast<double>(per_alternate.size());
  return mean;
}

std::vector<FeatureRow> compute_feature_rows(std::span<const VerificationCase> cases,
                                             const FeatureOptions& options,
                                             const EmbeddingProvider& embedder,
                                             std::size_t workers) {
  std::vector<FeatureRow> rows(cases.size());
  parallel_for(cases.size(), workers, [&](std::size_t i) {
    rows[i] = FeatureRow{cases[i].id, cases[i].label,
                         compute_case_features(cases[i], options, embedder)};
  });
  return rows;
}

std::string render_feature_table(std::span<const std::string> columns,
                                 std::span<const FeatureRow> rows) {
  std::vector<std::string> header{"id", "label"};
  header.insert(header.end(), columns.begin(), columns.end());
  std::string out = detail::csv_line(header);
  for (const auto& row : rows) {
    if (row.values.size() != columns.size())
      throw ValidationError("feature row '" + row.id + "' has " + std::to_string(row.values.size()) +
                            " values for " + std::to_string(columns.size()) + " columns");
    std::vector<std::string> fields{row.id, row.label ? std::to_string(*row.label) : ""};
    for (double v : row.values) fields.push_back(detail::format_double(v));
    out += detail::csv_line(fields);
  }
  return out;
}

FeatureTable parse_feature_table(std::string_view text) {
  const auto records = detail::parse_csv(text);
  if (records.empty()) throw ParseError("feature table is empty");
  const auto& header = records.front();
  if (header.size() < 2 || header[0] != "id" || header[1] != "label")
    throw ParseError("feature table header must start with 'id,label'");

  FeatureTable table;
  table.columns.assign(header.begin() + 2, header.end());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size())
      throw ParseError("feature table row " + std::to_string(r) + " has " +
                       std::to_string(rec.size()) + " fields, expected " +
                       std::to_string(header.size()));
    FeatureRow row;
    row.id = rec[0];
    if (!rec[1].empty()) {
      if (rec[1] != "0" && rec[1] != "1")
        throw ValidationError("feature table row " + std::to_string(r) + ": label must be 0 or 1");
      row.label = rec[1] == "1" ? 1 : 0;
    }
    for (std::size_t k = 2; k < rec.size(); ++k) row.values.push_back(detail::parse_double(rec[k]));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace magv
