// SPDX-License-Identifier: Apache-2.0

#include "magv/evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "magv/error.hpp"
#include "magv/parallel.hpp"
#include "magv/random.hpp"

namespace magv {

using nlohmann::json;

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw ValidationError("stratified folds: k must be >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(label)));
    rng.shuffle(members);
    for (const auto idx : members) {
      folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

namespace {

void check_lengths(std::span<const int> pred, std::span<const int> gold, const char* what) {
  if (pred.size() != gold.size())
    throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(pred.size()) +
                          " vs " + std::to_string(gold.size()) + ")");
  if (pred.empty()) throw ValidationError(std::string(what) + ": empty input");
}

double class_f1(std::span<const int> pred, std::span<const int> gold, int c) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == c && gold[i] == c) ++tp;
    else if (pred[i] == c) ++fp;
    else if (gold[i] == c) ++fn;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

double accuracy(std::span<const int> pred, std::span<const int> gold) {
  check_lengths(pred, gold, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double f1(std::span<const int> pred, std::span<const int> gold, F1Averaging averaging) {
  check_lengths(pred, gold, "f1");
  if (averaging == F1Averaging::positive_class) return class_f1(pred, gold, 1);
  return (class_f1(pred, gold, 0) + class_f1(pred, gold, 1)) / 2.0;
}

double cohens_kappa(std::span<const int> a, std::span<const int> b) {
  check_lengths(a, b, "cohens_kappa");
  const double n = static_cast<double>(a.size());
  std::map<int, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i] ? 1 : 0;
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
  }
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0;
  for (const auto& [label, counts] : marginals)
    p_e += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  if (p_e >= 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

std::vector<Sample> make_samples(std::span<const VerificationCase> cases,
                                 const FeatureOptions& options,
                                 const EmbeddingProvider& embedder, std::size_t workers) {
  for (const auto& c : cases)
    if (!c.label) throw ValidationError("case '" + c.id + "' has no label");
  const auto rows = compute_feature_rows(cases, options, embedder, workers);
  std::vector<Sample> samples;
  samples.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i)
    samples.push_back(Sample{cases[i].id, cases[i].base_question, rows[i].values, *cases[i].label});
  return samples;
}

std::string model_label(const ModelSpec& spec) {
  std::string name(to_string(spec.algorithm));
  if (spec.algorithm == Algorithm::knn) name += "(k=" + std::to_string(spec.k) + ")";
  return name;
}

namespace {

std::vector<std::size_t> resolve_subset(const CvProtocol& protocol, std::size_t dim) {
  if (protocol.feature_subset.empty()) {
    std::vector<std::size_t> all(dim);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  for (auto f : protocol.feature_subset)
    if (f >= dim)
      throw ValidationError("feature subset index " + std::to_string(f) + " out of range (" +
                            std::to_string(dim) + " trajectory features)");
  return protocol.feature_subset;
}

FeatureMatrix build_matrix(std::span<const Sample> samples, std::span<const std::size_t> rows,
                           std::span<const std::size_t> subset, const TfidfModel* tfidf) {
  FeatureMatrix m;
  m.reserve(rows.size());
  for (const auto r : rows) {
    std::vector<double> x;
    for (const auto f : subset) x.push_back(samples[r].trajectory_features[f]);
    if (tfidf != nullptr) {
      const auto t = transform_tfidf(*tfidf, samples[r].question);
      x.insert(x.end(), t.begin(), t.end());
    }
    m.push_back(std::move(x));
  }
  return m;
}

void check_samples(std::span<const Sample> samples, std::size_t folds) {
  if (samples.empty()) throw ValidationError("cross-validation: no samples");
  if (samples.size() < folds)
    throw ValidationError("cross-validation: " + std::to_string(samples.size()) +
                          " samples cannot fill " + std::to_string(folds) + " folds");
  const auto dim = samples.front().trajectory_features.size();
  std::size_t ones = 0;
  for (const auto& s : samples) {
    if (s.trajectory_features.size() != dim)
      throw ValidationError("cross-validation: sample '" + s.id + "' has a different feature count");
    if (s.label != 0 && s.label != 1)
      throw ValidationError("cross-validation: sample '" + s.id + "' label must be 0 or 1");
    ones += static_cast<std::size_t>(s.label);
  }
  if (ones == 0 || ones == samples.size())
    throw ValidationError("cross-validation: both classes must be present");
}

}  // namespace

CvReport cross_validate(std::span<const Sample> samples, std::span<const ModelSpec> specs,
                        const CvProtocol& protocol, const FoldObserver& observer) {
  check_samples(samples, protocol.folds);
  if (specs.empty()) throw ValidationError("cross-validation: no model specs");
  if (protocol.seeds.empty()) throw ValidationError("cross-validation: no seeds");
  const auto subset = resolve_subset(protocol, samples.front().trajectory_features.size());
  if (subset.empty() && !protocol.use_tfidf)
    throw ValidationError("cross-validation: no features selected");

  std::vector<int> labels;
  for (const auto& s : samples) labels.push_back(s.label);

  const std::size_t n_seeds = protocol.seeds.size(), k = protocol.folds;
  std::vector<std::vector<std::vector<std::size_t>>> folds_by_seed(n_seeds);
  for (std::size_t si = 0; si < n_seeds; ++si)
    folds_by_seed[si] = stratified_folds(labels, k, protocol.seeds[si]);

  // cells[model][seed][fold]
  std::vector<CvCell> cells(specs.size() * n_seeds * k);
  const auto slot = [&](std::size_t m, std::size_t s, std::size_t f) -> CvCell& {
    return cells[(m * n_seeds + s) * k + f];
  };

  parallel_for(n_seeds * k, protocol.workers, [&](std::size_t job) {
    const std::size_t si = job / k, fi = job % k;
    const auto seed = protocol.seeds[si];
    const auto& test_rows = folds_by_seed[si][fi];
    std::vector<std::size_t> train_rows;
    std::set<std::size_t> held_out(test_rows.begin(), test_rows.end());
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (held_out.count(i) == 0) train_rows.push_back(i);

    std::optional<TfidfModel> tfidf;
    if (protocol.use_tfidf) {
      std::vector<std::string> corpus;
      for (auto r : train_rows) corpus.push_back(samples[r].question);
      tfidf = fit_tfidf(corpus);
    }
    const auto x_train = build_matrix(samples, train_rows, subset, tfidf ? &*tfidf : nullptr);
    const auto x_test = build_matrix(samples, test_rows, subset, tfidf ? &*tfidf : nullptr);
    std::vector<int> y_train, y_test;
    for (auto r : train_rows) y_train.push_back(labels[r]);
    for (auto r : test_rows) y_test.push_back(labels[r]);

    for (std::size_t mi = 0; mi < specs.size(); ++mi) {
      ModelSpec spec = specs[mi];
      spec.seed = seed;
      const auto model = train(spec, x_train, y_train);
      const auto pred = model.predict(x_test);
      const auto name = model_label(specs[mi]);
      slot(mi, si, fi) = CvCell{name,
                                seed,
                                fi,
                                accuracy(pred, y_test),
                                f1(pred, y_test, F1Averaging::positive_class),
                                f1(pred, y_test, F1Averaging::macro)};
      if (observer)
        observer(name, FoldFit{seed, fi, train_rows, test_rows, tfidf, model.standardizer()});
    }
  });

  CvReport report;
  report.folds = k;
  report.seeds = protocol.seeds;
  report.mode = protocol.mode;
  report.aggregation = protocol.aggregation;
  report.feature_subset = subset;
  report.use_tfidf = protocol.use_tfidf;
  report.cells = std::move(cells);
  for (std::size_t mi = 0; mi < specs.size(); ++mi) {
    ModelSummary s{model_label(specs[mi])};
    const std::size_t per_model = n_seeds * k;
    for (std::size_t c = 0; c < per_model; ++c) {
      const auto& cell = report.cells[mi * per_model + c];
      s.accuracy += cell.accuracy;
      s.f1 += cell.f1;
      s.f1_macro += cell.f1_macro;
    }
    s.accuracy /= static_cast<double>(per_model);
    s.f1 /= static_cast<double>(per_model);
    s.f1_macro /= static_cast<double>(per_model);
    report.summary.push_back(s);
  }
  return report;
}

std::string render_cv_report(const CvReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells)
    cells.push_back(json{{"model", c.model},
                         {"seed", c.seed},
                         {"fold", c.fold},
                         {"accuracy", c.accuracy},
                         {"f1", c.f1},
                         {"f1_macro", c.f1_macro}});
  json summary = json::array();
  for (const auto& s : r.summary)
    summary.push_back(json{{"model", s.model},
                           {"accuracy", s.accuracy},
                           {"f1", s.f1},
                           {"f1_macro", s.f1_macro}});
  const json doc{{"protocol",
                  {{"folds", r.folds},
                   {"seeds", r.seeds},
                   {"feature_mode", to_string(r.mode)},
                   {"aggregation", to_string(r.aggregation)},
                   {"feature_subset", r.feature_subset},
                   {"tfidf", r.use_tfidf}}},
                 {"cells", std::move(cells)},
                 {"summary", std::move(summary)}};
  return doc.dump(2) + "\n";
}

std::string render_cv_summary(const CvReport& r) {
  std::string out = detail::csv_line({"model", "accuracy", "f1", "f1_macro"});
  for (const auto& s : r.summary)
    out += detail::csv_line({s.model, detail::format_double(s.accuracy),
                             detail::format_double(s.f1), detail::format_double(s.f1_macro)});
  return out;
}

namespace {

bool score_less(const SubsetScore& a, const SubsetScore& b) {
  if (a.accuracy != b.accuracy) return a.accuracy < b.accuracy;
  return a.f1 < b.f1;
}

}  // namespace

AblationReport ablate_features(std::span<const Sample> samples, std::span<const ModelSpec> specs,
                               std::span<const std::string> feature_names, std::size_t folds,
                               std::vector<std::uint64_t> seeds, std::size_t workers) {
  check_samples(samples, folds);
  const std::size_t dim = samples.front().trajectory_features.size();
  if (feature_names.size() != dim)
    throw ValidationError("ablation: " + std::to_string(feature_names.size()) +
                          " feature names for " + std::to_string(dim) + " features");
  if (dim == 0 || dim > 16) throw ValidationError("ablation: feature count must be in 1..16");
  if (seeds.empty()) throw ValidationError("ablation: no seeds");

  const std::size_t n_subsets = (std::size_t{1} << dim) - 1;
  std::vector<std::vector<std::size_t>> subsets(n_subsets);
  for (std::size_t mask = 1; mask <= n_subsets; ++mask)
    for (std::size_t f = 0; f < dim; ++f)
      if (mask & (std::size_t{1} << f)) subsets[mask - 1].push_back(f);

  // scores[subset][seed][model]
  std::vector<std::vector<std::vector<SubsetScore>>> scores(n_subsets);
  parallel_for(n_subsets, workers, [&](std::size_t si) {
    scores[si].resize(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      CvProtocol protocol;
      protocol.folds = folds;
      protocol.seeds = {seeds[s]};
      protocol.feature_subset = subsets[si];
      protocol.use_tfidf = false;
      const auto report = cross_validate(samples, specs, protocol);
      for (const auto& sum : report.summary)
        scores[si][s].push_back(SubsetScore{subsets[si], sum.accuracy, sum.f1});
    }
  });

  AblationReport report;
  report.feature_names.assign(feature_names.begin(), feature_names.end());
  report.folds = folds;
  report.seeds = seeds;
  report.subsets_evaluated = n_subsets;
  for (std::size_t m = 0; m < specs.size(); ++m) {
    AblationResult result;
    result.model = model_label(specs[m]);
    std::vector<std::set<std::size_t>> best_sets;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      SubsetScore top = scores[0][s][m];
      for (std::size_t si = 1; si < n_subsets; ++si)
        if (score_less(top, scores[si][s][m])) top = scores[si][s][m];
      std::vector<SubsetScore> best;
      std::set<std::size_t> ids;
      for (std::size_t si = 0; si < n_subsets; ++si) {
        const auto& sc = scores[si][s][m];
        if (sc.accuracy == top.accuracy && sc.f1 == top.f1) {
          best.push_back(sc);
          ids.insert(si);
        }
      }
      result.best_per_seed.push_back(std::move(best));
      best_sets.push_back(std::move(ids));
    }

    const auto mean_over_seeds = [&](std::size_t si) {
      SubsetScore mean{subsets[si], 0, 0};
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        mean.accuracy += scores[si][s][m].accuracy;
        mean.f1 += scores[si][s][m].f1;
      }
      mean.accuracy /= static_cast<double>(seeds.size());
      mean.f1 /= static_cast<double>(seeds.size());
      return mean;
    };
    for (const auto si : best_sets.front()) {
      const bool everywhere = std::all_of(best_sets.begin(), best_sets.end(),
                                          [si](const auto& set) { return set.count(si) > 0; });
      if (everywhere) result.consistent_best.push_back(mean_over_seeds(si));
    }
    result.best_mean = mean_over_seeds(0);
    for (std::size_t si = 1; si < n_subsets; ++si) {
      const auto cand = mean_over_seeds(si);
      const auto& cur = result.best_mean;
      if (score_less(cur, cand) ||
          (!score_less(cand, cur) && cand.subset.size() < cur.subset.size()))
        result.best_mean = cand;
    }
    report.models.push_back(std::move(result));
  }
  return report;
}

std::string render_ablation_report(const AblationReport& r) {
  const auto subset_json = [&](const SubsetScore& s) {
    std::vector<std::string> names;
    for (auto f : s.subset) names.push_back(r.feature_names[f]);
    return json{{"features", names}, {"accuracy", s.accuracy}, {"f1", s.f1}};
  };
  json models = json::array();
  for (const auto& m : r.models) {
    json per_seed = json::array();
    for (std::size_t s = 0; s < m.best_per_seed.size(); ++s) {
      json best = json::array();
      for (const auto& sc : m.best_per_seed[s]) best.push_back(subset_json(sc));
      per_seed.push_back(json{{"seed", r.seeds[s]}, {"best", std::move(best)}});
    }
    json consistent = json::array();
    for (const auto& sc : m.consistent_best) consistent.push_back(subset_json(sc));
    models.push_back(json{{"model", m.model},
                          {"best_per_seed", std::move(per_seed)},
                          {"consistent_best", std::move(consistent)},
                          {"best_mean", subset_json(m.best_mean)}});
  }
  const json doc{{"features", r.feature_names},
                 {"folds", r.folds},
                 {"seeds", r.seeds},
                 {"subsets_evaluated", r.subsets_evaluated},
                 {"models", std::move(models)}};
  return doc.dump(2) + "\n";
}

}  // namespace magv
