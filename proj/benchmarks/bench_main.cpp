// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "fixtures.hpp"
#include "magv/classifiers.hpp"
#include "magv/random.hpp"
#include "magv/similarity.hpp"
#include "magv/text_features.hpp"

using namespace magv;

namespace {

std::vector<Trajectory> trajectories(std::size_t count, std::size_t max_len) {
  Rng rng(11);
  const std::vector<std::string> tools{"search", "fetch", "convert", "weather", "logs", "metrics"};
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(fixture::random_trajectory(rng, tools, max_len));
  return out;
}

void BM_EditDistance(benchmark::State& state) {
  const auto ts = trajectories(64, static_cast<std::size_t>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(edit_distance(ts[i % 64], ts[(i + 1) % 64], ArgMode::with_args));
    ++i;
  }
}
BENCHMARK(BM_EditDistance)->Arg(4)->Arg(16)->Arg(64);

void BM_GraphEditDistance(benchmark::State& state) {
  const auto ts = trajectories(64, static_cast<std::size_t>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(graph_edit_distance(ts[i % 64], ts[(i + 1) % 64], ArgMode::with_args));
    ++i;
  }
}
BENCHMARK(BM_GraphEditDistance)->Arg(4)->Arg(8)->Arg(kDefaultGedCap);

void BM_KnnPredict(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  FeatureMatrix x(n, std::vector<double>(6));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(rng.below(2));
    for (auto& v : x[i]) v = static_cast<double>(rng.below(1000)) / 100.0 + y[i];
  }
  ModelSpec spec;
  spec.k = 5;
  const auto model = train(spec, x, y);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x[i++ % n]));
}
BENCHMARK(BM_KnnPredict)->Arg(64)->Arg(1024);

void BM_Tfidf(benchmark::State& state) {
  Rng rng(3);
  const std::vector<std::string> words{"weather", "boston", "latency", "service", "error", "rate",
                                       "convert", "euro", "dollar", "today", "what", "is"};
  std::vector<std::string> corpus;
  for (int d = 0; d < state.range(0); ++d) {
    std::string doc;
    for (int w = 0; w < 12; ++w) doc += words[rng.below(words.size())] + " ";
    corpus.push_back(doc);
  }
  for (auto _ : state) {
    const auto model = fit_tfidf(corpus);
    benchmark::DoNotOptimize(transform_tfidf(model, corpus.front()));
  }
}
BENCHMARK(BM_Tfidf)->Arg(45)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
