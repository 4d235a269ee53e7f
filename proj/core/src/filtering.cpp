// SPDX-License-Identifier: Apache-2.0

#include "magv/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "csv.hpp"
#include "magv/error.hpp"

namespace magv {

namespace {

std::size_t check_rows(const Points& points) {
  const std::size_t d = points.empty() ? 0 : points.front().size();
  for (const auto& row : points)
    if (row.size() != d) throw ValidationError("points have inconsistent dimensions");
  return d;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace

Points reduce_dimensions(const Points& embeddings, std::size_t target_dim) {
  const std::size_t n = embeddings.size();
  if (n < 2) throw ValidationError("dimension reduction needs at least 2 rows");
  const std::size_t d = check_rows(embeddings);
  if (target_dim == 0 || target_dim > std::min(n, d))
    throw ValidationError("cannot reduce " + std::to_string(n) + "x" + std::to_string(d) +
                          " data to " + std::to_string(target_dim) + " dimensions");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = embeddings[i][j];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  Eigen::MatrixXd v = svd.matrixV().leftCols(static_cast<Eigen::Index>(target_dim));
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index arg = 0;
    v.col(c).cwiseAbs().maxCoeff(&arg);
    if (v(arg, c) < 0) v.col(c) *= -1.0;
  }
  const Eigen::MatrixXd projected = x * v;

  Points out(n, std::vector<double>(target_dim));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < target_dim; ++j)
      out[i][j] = projected(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

Points standardize_columns(const Points& points) {
  const std::size_t d = check_rows(points);
  if (points.empty()) return {};
  const double n = static_cast<double>(points.size());
  Points out = points;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0;
    for (const auto& row : points) mean += row[j];
    mean /= n;
    double var = 0;
    for (const auto& row : points) var += (row[j] - mean) * (row[j] - mean);
    const double sd = std::sqrt(var / n);
    for (auto& row : out) row[j] = sd > 0 ? (row[j] - mean) / sd : row[j] - mean;
  }
  return out;
}

ClusterAssignment cluster(const Points& points, double eps, std::size_t min_pts) {
  if (!(eps > 0)) throw ValidationError("eps must be positive");
  if (min_pts < 1) throw ValidationError("min_pts must be at least 1");
  check_rows(points);
  const std::size_t n = points.size();

  auto neighbors = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if (distance(points[i], points[j]) <= eps) out.push_back(j);
    return out;
  };

  constexpr int unvisited = -2;
  std::vector<int> labels(n, unvisited);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != unvisited) continue;
    const auto seeds = neighbors(i);
    if (seeds.size() < min_pts) {
      labels[i] = -1;
      continue;
    }
    const int id = next++;
    labels[i] = id;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const auto q = queue.front();
      queue.pop_front();
      if (labels[q] == -1) labels[q] = id;
      if (labels[q] != unvisited) continue;
      labels[q] = id;
      const auto more = neighbors(q);
      if (more.size() >= min_pts) queue.insert(queue.end(), more.begin(), more.end());
    }
  }

  ClusterAssignment a;
  a.labels = labels;
  const std::size_t d = n == 0 ? 0 : points.front().size();
  a.centroids.assign(static_cast<std::size_t>(next), std::vector<double>(d, 0.0));
  std::vector<std::size_t> sizes(static_cast<std::size_t>(next), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) continue;
    auto& c = a.centroids[static_cast<std::size_t>(labels[i])];
    for (std::size_t k = 0; k < d; ++k) c[k] += points[i][k];
    ++sizes[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c = 0; c < a.centroids.size(); ++c)
    for (auto& v : a.centroids[c]) v /= static_cast<double>(sizes[c]);
  return a;
}

std::vector<std::size_t> select_representatives(const ClusterAssignment& assignment,
                                                const Points& points, std::size_t per_cluster) {
  if (per_cluster < 1) throw ValidationError("per_cluster must be at least 1");
  if (assignment.labels.size() != points.size())
    throw ValidationError("assignment and points differ in length");
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < assignment.cluster_count(); ++c) {
    std::vector<std::pair<double, std::size_t>> members;
    for (std::size_t i = 0; i < points.size(); ++i)
      if (assignment.labels[i] == static_cast<int>(c))
        members.emplace_back(distance(points[i], assignment.centroids[c]), i);
    std::sort(members.begin(), members.end());
    for (std::size_t k = 0; k < std::min(per_cluster, members.size()); ++k)
      out.push_back(members[k].second);
  }
  return out;
}

FilterResult filter_pipeline(std::span<const QuestionRecord> questions,
                             const EmbeddingProvider& embedder, const FilterParams& params,
                             const std::set<std::string>& drop_ids) {
  std::vector<std::string> texts;
  texts.reserve(questions.size());
  for (const auto& q : questions) texts.push_back(q.question);
  const auto embeddings = embedder.embed_batch(texts, params.workers);
  const auto points = standardize_columns(reduce_dimensions(embeddings, params.target_dim));
  const auto assignment = cluster(points, params.eps, params.min_pts);
  const auto selected = select_representatives(assignment, points, params.per_cluster);

  FilterResult result;
  result.report.resize(questions.size());
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const int c = assignment.labels[i];
    result.report[i] = ProvenanceRow{
        questions[i].id, c,
        c < 0 ? std::numeric_limits<double>::quiet_NaN()
              : distance(points[i], assignment.centroids[static_cast<std::size_t>(c)]),
        c < 0 ? "noise" : "not_selected"};
  }
  for (const auto i : selected) {
    if (drop_ids.count(questions[i].id) != 0) {
      result.report[i].decision = "dropped_manual";
    } else {
      result.report[i].decision = "kept";
      result.kept.push_back(questions[i]);
    }
  }
  return result;
}

std::string render_filter_report(const FilterResult& result) {
  std::string out = detail::csv_line({"id", "cluster", "distance", "decision"});
  for (const auto& row : result.report)
    out += detail::csv_line({row.id, std::to_string(row.cluster),
                             std::isnan(row.distance) ? "" : detail::format_double(row.distance),
                             row.decision});
  return out;
}

}  // namespace magv
