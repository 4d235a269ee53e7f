// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "magv/embedding.hpp"
#include "magv/trajectory.hpp"

namespace magv {

/// Row-major dense points, one row per item.
using Points = std::vector<std::vector<double>>;

/// Projects rows onto the top `target_dim` principal components of the
/// mean-centered data. Each component is signed so its largest-magnitude
/// coordinate is positive. Throws ValidationError when n < 2, rows are
/// ragged, or target_dim exceeds min(n, d).
Points reduce_dimensions(const Points& embeddings, std::size_t target_dim = 2);

/// Per-column z-score. Constant columns are centered only.
Points standardize_columns(const Points& points);

struct ClusterAssignment {
  /// Cluster id per point, -1 for noise. Ids are 0.. in discovery order.
  std::vector<int> labels;
  /// Mean of each cluster's members.
  Points centroids;

  std::size_t cluster_count() const noexcept { return centroids.size(); }
};

/// DBSCAN. Neighborhoods are closed balls of radius eps and include the
/// point itself; points are scanned in index order.
ClusterAssignment cluster(const Points& points, double eps, std::size_t min_pts);

/// Indices of the `per_cluster` members nearest each centroid (ties by
/// index), cluster by cluster.
std::vector<std::size_t> select_representatives(const ClusterAssignment& assignment,
                                                const Points& points, std::size_t per_cluster = 5);

struct FilterParams {
  std::size_t target_dim = 2;
  double eps = 0.5;
  std::size_t min_pts = 3;
  std::size_t per_cluster = 5;
  std::size_t workers = 1;
};

struct ProvenanceRow {
  std::string id;
  int cluster = -1;
  /// Distance to the cluster centroid in clustering coordinates; NaN for noise.
  double distance = 0.0;
  /// kept | dropped_manual | not_selected | noise
  std::string decision;
};

struct FilterResult {
  std::vector<QuestionRecord> kept;
  std::vector<ProvenanceRow> report;  // input order
};

/// embed -> reduce -> standardize -> cluster -> select, then removes ids in
/// `drop_ids`. Kept questions are in selection order.
FilterResult filter_pipeline(std::span<const QuestionRecord> questions,
                             const EmbeddingProvider& embedder, const FilterParams& params,
                             const std::set<std::string>& drop_ids = {});

/// CSV with header id,cluster,distance,decision.
std::string render_filter_report(const FilterResult& result);

}  // namespace magv
