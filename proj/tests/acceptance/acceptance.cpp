// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "fixtures.hpp"
#include "magv/classifiers.hpp"
#include "magv/evaluation.hpp"
#include "magv/random.hpp"
#include "magv/similarity.hpp"
#include "magv/text_features.hpp"
#include "magv_app/commands.hpp"
#include "magv_app/config.hpp"
#include "oracles.hpp"

using namespace magv;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr double kHandTolerance = 1e-9;
constexpr double kOracleBudgetSeconds = 10.0;
constexpr double kPipelineBudgetSeconds = 60.0;
constexpr double kSeparabilityFloor = 0.90;
constexpr std::size_t kMetricTriples = 10000;
constexpr std::size_t kKnnDatasets = 1000;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

bool near(double a, double b) { return std::abs(a - b) <= kHandTolerance; }

Outcome feature_oracles() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto seqs = fixture::all_sequences({"a", "b", "c"}, 4);
  std::vector<Trajectory> ts;
  for (const auto& s : seqs) ts.push_back(fixture::from_names(s));
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (std::size_t j = 0; j < ts.size(); ++j) {
      ++pairs;
      const auto& a = seqs[i];
      const auto& b = seqs[j];
      o.require(edit_distance(ts[i], ts[j], ArgMode::with_args) == oracle::edit_distance(a, b), "edit_distance mismatch");
      o.require(graph_edit_distance(ts[i], ts[j], ArgMode::with_args) == static_cast<double>(oracle::path_ged(a, b)),
                "graph_edit_distance mismatch");
      const auto [num, den] = oracle::lcss_ratio(a, b);
      o.require(lcss(ts[i], ts[j], ArgMode::with_args) == static_cast<double>(num) / static_cast<double>(den),
                "lcss mismatch");
    }
  const double elapsed = seconds_since(t0);
  o.require(seqs.size() == 121, "expected 121 sequences of length <= 4");
  o.require(elapsed < kOracleBudgetSeconds, "took " + fmt(elapsed) + " s");
  if (o.pass) o.detail = std::to_string(pairs) + " pairs in " + fmt(elapsed) + " s";
  return o;
}

Outcome metric_axioms() {
  Outcome o;
  Rng rng(2024);
  const std::vector<std::string> tools{"a", "b", "c"};
  for (std::size_t n = 0; n < kMetricTriples; ++n) {
    const auto x = fixture::random_trajectory(rng, tools, 5);
    const auto y = fixture::random_trajectory(rng, tools, 5);
    const auto z = fixture::random_trajectory(rng, tools, 5);
    const auto dxy = edit_distance(x, y, ArgMode::with_args);
    const auto dyx = edit_distance(y, x, ArgMode::with_args);
    const auto dxz = edit_distance(x, z, ArgMode::with_args);
    const auto dyz = edit_distance(y, z, ArgMode::with_args);
    o.require(edit_distance(x, x, ArgMode::with_args) == 0, "d(x,x) != 0");
    o.require((dxy == 0) == trajectories_equal(x, y, ArgMode::with_args), "d(x,y) = 0 iff x = y violated");
    o.require(dxy == dyx, "symmetry violated");
    o.require(dxz <= dxy + dyz, "triangle inequality violated");
  }
  if (o.pass) o.detail = std::to_string(kMetricTriples) + " triples";
  return o;
}

Outcome hand_fixtures() {
  Outcome o;
  using fixture::call;
  const Trajectory bt{{call("get_current_weather", {{"city", "Boston"}, {"units", "F"}})}};
  const Trajectory at{{call("get_current_weather", {{"city", "Boston"}})}};
  o.require(near(argument_overlap(bt, at), 2.0 / 3.0), "AO != 2/3");
  o.require(near(lcss(fixture::chain({"t1", "t2", "t3"}), fixture::chain({"t1", "t2", "t4"}), ArgMode::with_args),
                 2.0 / 3.0),
            "LCSS != 2/3");

  const std::vector<std::string> corpus{"a b", "a"};
  const auto model = fit_tfidf(corpus);
  const double idf_b = std::log(1.5) + 1.0;
  o.require(model.idf().size() == 2 && near(model.idf()[0], 1.0) && near(model.idf()[1], idf_b), "idf mismatch");
  const auto v = transform_tfidf(model, "a a b");
  const double norm = std::sqrt(4.0 + idf_b * idf_b);
  o.require(v.size() == 2 && near(v[0], 2.0 / norm) && near(v[1], idf_b / norm), "tf-idf vector mismatch");
  o.require(near(cosine(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}), 32.0 / std::sqrt(14.0 * 77.0)),
            "cosine mismatch");

  o.require(near(cohens_kappa(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 1, 0}), 0.0), "kappa != 0");
  // p_o = 0.8, p_e = 0.4*0.4 + 0.6*0.6 = 0.52.
  const std::vector<int> x{1, 1, 1, 1, 0, 0, 0, 0, 0, 0}, y{1, 1, 1, 0, 1, 0, 0, 0, 0, 0};
  o.require(near(cohens_kappa(x, y), 0.28 / 0.48), "kappa != 0.28/0.48");
  if (o.pass) o.detail = "AO, LCSS, TF-IDF, cosine, kappa within " + fmt(kHandTolerance);
  return o;
}

Outcome knn_oracle() {
  Outcome o;
  Rng rng(99);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng.next() >> 11) * 0x1.0p-53; };
  std::size_t checked = 0;
  for (std::size_t trial = 0; trial < kKnnDatasets && o.pass; ++trial) {
    const std::size_t n = 2 + rng.below(49), d = 1 + rng.below(10);
    FeatureMatrix x(n, std::vector<double>(d));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.below(2));
      for (auto& v : x[i]) v = uniform(-2, 2) + y[i];
    }
    FeatureMatrix probes(5, std::vector<double>(d));
    for (auto& p : probes)
      for (auto& v : p) v = uniform(-2, 3);
    auto z_probes = probes;
    const auto z_train = oracle::zscore_columns(x, &z_probes);
    for (std::size_t k : {1u, 4u, 5u}) {
      ModelSpec spec;
      spec.k = k;
      const auto model = train(spec, x, y);
      for (std::size_t p = 0; p < probes.size(); ++p) {
        o.require(model.predict(probes[p]) == oracle::knn(z_train, y, z_probes[p], k),
                  "dataset " + std::to_string(trial) + " k=" + std::to_string(k));
        ++checked;
      }
    }
  }
  if (o.pass) o.detail = std::to_string(kKnnDatasets) + " datasets, " + std::to_string(checked) + " predictions";
  return o;
}

Outcome stratification() {
  Outcome o;
  const auto labels = fixture::labels_30_15();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto folds = stratified_folds(labels, 10, seed);
    o.require(folds.size() == 10, "expected 10 folds");
    std::vector<int> seen(labels.size(), 0);
    for (const auto& fold : folds) {
      std::size_t zeros = 0, ones = 0;
      for (auto i : fold) {
        ++seen[i];
        (labels[i] == 0 ? zeros : ones) += 1;
      }
      o.require(zeros == 3, "seed " + std::to_string(seed) + ": fold with " + std::to_string(zeros) + " class-0");
      o.require(ones >= 1 && ones <= 2, "seed " + std::to_string(seed) + ": fold with " + std::to_string(ones) + " class-1");
    }
    o.require(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }), "folds do not partition");
  }
  if (o.pass) o.detail = "3 seeds x 10 folds, 3 class-0 and 1-2 class-1 each";
  return o;
}

Outcome separability() {
  Outcome o;
  const auto cases = fixture::separable_cases();
  for (const auto& c : cases)
    for (const auto& a : c.alternates) {
      const auto d = edit_distance(c.base_trajectory, a.trajectory, ArgMode::with_args);
      o.require(*c.label == 1 ? d <= 1 : d >= 3, "fixture construction violated for " + c.id);
    }
  const HashingEmbedder embedder;
  o.require(cases.size() == 40, "fixture has " + std::to_string(cases.size()) + " cases");
  const auto samples = make_samples(cases, {}, embedder);
  const CvProtocol protocol;
  const auto spec = default_spec(Algorithm::knn, ArgMode::with_args);
  o.require(spec.k == 4, "default with-arguments k is not 4");
  const auto report = cross_validate(samples, spec, protocol);
  const double acc = report.summary.at(0).accuracy;
  o.require(acc >= kSeparabilityFloor, "mean accuracy " + fmt(acc));
  if (o.pass) o.detail = "knn(k=4) mean accuracy " + fmt(acc) + " over 10 folds x 3 seeds";
  return o;
}

Outcome ablation() {
  Outcome o;
  const auto samples = fixture::edit_informative_samples();
  const auto specs = default_model_suite(ArgMode::with_args);
  const auto names = feature_names(ArgMode::with_args);
  const auto report = ablate_features(samples, specs, names, 5, {1, 2, 3});
  o.require(report.subsets_evaluated == 63, "evaluated " + std::to_string(report.subsets_evaluated) + " subsets");
  o.require(report.folds == 5 && report.seeds.size() == 3, "protocol is not 5 folds x 3 seeds");
  o.require(report.models.size() == specs.size(), "missing models");
  for (const auto& m : report.models) {
    o.require(m.best_per_seed.size() == 3, m.model + ": missing seeds");
    for (const auto& best : m.best_per_seed) {
      o.require(!best.empty(), m.model + ": no best subset");
      for (const auto& s : best)
        o.require(std::count(s.subset.begin(), s.subset.end(), 1u) == 1, m.model + ": best subset without EDIT");
    }
    o.require(std::count(m.best_mean.subset.begin(), m.best_mean.subset.end(), 1u) == 1,
              m.model + ": best mean subset without EDIT");
  }
  if (o.pass) o.detail = "63 subsets, 5 models x 3 seeds, every best subset contains edit";
  return o;
}

Outcome determinism() {
  Outcome o;
  const char* fixtures = std::getenv("MAGV_FIXTURES");
  const std::string dir = std::string(fixtures ? fixtures : "tests/fixtures") + "/pipeline";
  auto config = app::load_config(dir + "/config.json");
  app::validate(config);
  const auto root = fs::temp_directory_path() / "magv_acceptance";
  fs::remove_all(root);
  const auto t0 = Clock::now();
  std::vector<std::map<std::string, std::string>> runs;
  for (int r = 0; r < 3; ++r) {
    const auto out = root / ("run" + std::to_string(r));
    app::run_command("pipeline", config, {{"out_dir", out.string()}});
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(out)) {
      std::ifstream in(e.path(), std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      files[e.path().filename().string()] = s.str();
    }
    runs.push_back(std::move(files));
  }
  const double elapsed = seconds_since(t0);
  o.require(runs[0].size() == 8, "expected 8 artifacts, got " + std::to_string(runs[0].size()));
  o.require(runs[0] == runs[1] && runs[0] == runs[2], "artifacts differ between runs");
  o.require(elapsed < kPipelineBudgetSeconds, "took " + fmt(elapsed) + " s");
  fs::remove_all(root);
  if (o.pass) o.detail = "3 runs, " + std::to_string(runs[0].size()) + " artifacts byte-identical, " + fmt(elapsed) + " s";
  return o;
}

Outcome leakage() {
  Outcome o;
  const HashingEmbedder embedder;
  auto samples = make_samples(fixture::separable_cases(), {}, embedder);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].question += i % 2 ? " latency spike" : " weather Boston";
  const auto spec = default_spec(Algorithm::knn, ArgMode::with_args);
  CvProtocol protocol;
  using Key = std::pair<std::uint64_t, std::size_t>;
  std::mutex mutex;
  std::map<Key, FoldFit> baseline;
  cross_validate(samples, spec, protocol, [&](const std::string&, const FoldFit& fit) {
    std::lock_guard lock(mutex);
    baseline.emplace(Key{fit.seed, fit.fold}, fit);
  });
  o.require(baseline.size() == 30, "expected 30 (seed, fold) fits");
  for (const auto& [key, fit] : baseline) {
    auto mutated = samples;
    for (auto r : fit.test_rows) mutated[r].question = "zebra quantum " + std::to_string(r) + " leak probe";
    bool seen = false;
    cross_validate(mutated, spec, protocol, [&](const std::string&, const FoldFit& other) {
      if (Key{other.seed, other.fold} != key) return;
      std::lock_guard lock(mutex);
      seen = true;
      o.require(other.tfidf && fit.tfidf && *other.tfidf == *fit.tfidf, "TF-IDF parameters changed");
      o.require(other.standardizer == fit.standardizer, "standardization parameters changed");
    });
    o.require(seen, "fold not observed after mutation");
  }
  if (o.pass) o.detail = "30 folds re-fitted with mutated held-out text, parameters unchanged";
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"feature oracles", feature_oracles}, {"metric axioms", metric_axioms},
      {"hand fixtures", hand_fixtures},     {"classifier oracle", knn_oracle},
      {"stratification", stratification},   {"separability", separability},
      {"ablation protocol", ablation},      {"determinism", determinism},
      {"leakage guard", leakage},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
