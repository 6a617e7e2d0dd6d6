#include <benchmark/benchmark.h>

#include "annograph/annotator.hpp"
#include "annograph/clustering.hpp"
#include "annograph/filtering.hpp"
#include "annograph/gcn.hpp"
#include "annograph/graph.hpp"
#include "annograph/rng.hpp"
#include "annograph/selection.hpp"
#include "annograph/synthetic.hpp"

using namespace annograph;

namespace {

const TextAttributedGraph& citation_graph() {
  static const TextAttributedGraph g = make_synthetic_tag(cora_like_config(1));
  return g;
}

const SparseNormalizedAdjacency& citation_adjacency() {
  static const SparseNormalizedAdjacency adj = normalized_adjacency(citation_graph());
  return adj;
}

}  // namespace

static void BM_NormalizedAdjacency(benchmark::State& state) {
  const auto& g = citation_graph();
  for (auto _ : state) benchmark::DoNotOptimize(normalized_adjacency(g));
}
BENCHMARK(BM_NormalizedAdjacency);

static void BM_PageRank(benchmark::State& state) {
  const auto& g = citation_graph();
  for (auto _ : state) benchmark::DoNotOptimize(pagerank(g, 0.85, 1e-10, 200));
}
BENCHMARK(BM_PageRank);

static void BM_Propagate2Hop(benchmark::State& state) {
  const auto& g = citation_graph();
  const auto& adj = citation_adjacency();
  for (auto _ : state) benchmark::DoNotOptimize(propagate(g.features, adj, 2));
}
BENCHMARK(BM_Propagate2Hop);

static void BM_KMeansBudget(benchmark::State& state) {
  const auto& g = citation_graph();
  const auto k = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(g.features, k, 7));
}
BENCHMARK(BM_KMeansBudget)->Arg(7)->Arg(140);

static void BM_CDensity(benchmark::State& state) {
  const auto& g = citation_graph();
  const auto model = kmeans(g.features, 7, 7);
  for (auto _ : state) benchmark::DoNotOptimize(c_density(g.features, model));
}
BENCHMARK(BM_CDensity);

static void BM_SelectFeatProp(benchmark::State& state) {
  const auto& g = citation_graph();
  for (auto _ : state) benchmark::DoNotOptimize(select_featprop(g, 140, 2, 3));
}
BENCHMARK(BM_SelectFeatProp);

static void BM_RankPercentile(benchmark::State& state) {
  Rng rng(5);
  ScoreVector scores{{}, "bench"};
  scores.values.resize(100000);
  for (double& v : scores.values) v = rng.next_double();
  for (auto _ : state) benchmark::DoNotOptimize(rank_percentile(scores));
}
BENCHMARK(BM_RankPercentile);

static void BM_PostFilter(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(11);
  std::vector<std::uint32_t> nodes(n);
  std::vector<int> labels(n);
  std::vector<double> confidences(n);
  std::vector<double> cdensity(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i] = static_cast<std::uint32_t>(i);
    labels[i] = static_cast<int>(rng.next_below(7));
    confidences[i] = 100.0 * rng.next_double();
    cdensity[i] = rng.next_double();
  }
  FilterConfig config;
  config.target_size = static_cast<std::uint32_t>(3 * n / 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(post_filter(nodes, labels, confidences, cdensity, 7, config));
}
BENCHMARK(BM_PostFilter)->Arg(140)->Arg(800);

static void BM_GcnForward(benchmark::State& state) {
  const auto& g = citation_graph();
  const auto& adj = citation_adjacency();
  Rng rng(3);
  gcn::GcnParams params;
  params.w1 = Matrix(g.feature_dim(), 64);
  params.w2 = Matrix(64, g.class_count());
  for (std::size_t i = 0; i < params.w1.rows(); ++i)
    for (std::size_t j = 0; j < params.w1.cols(); ++j) params.w1(i, j) = rng.next_normal() * 0.1;
  for (std::size_t i = 0; i < params.w2.rows(); ++i)
    for (std::size_t j = 0; j < params.w2.cols(); ++j) params.w2(i, j) = rng.next_normal() * 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(gcn::forward(adj, g.features, params));
}
BENCHMARK(BM_GcnForward);

static void BM_GcnTrain30Epochs(benchmark::State& state) {
  const auto& g = citation_graph();
  const auto& adj = citation_adjacency();
  const auto train_nodes = select_random(g.node_count, 140, 5);
  std::vector<int> labels;
  for (auto node : train_nodes) labels.push_back(g.gold_labels[node]);
  gcn::TrainConfig config;
  config.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        gcn::train(adj, g.features, g.class_count(), train_nodes, labels, nullptr, config));
  }
}
BENCHMARK(BM_GcnTrain30Epochs);

static void BM_SimulatedAnnotateBatch(benchmark::State& state) {
  const auto& g = citation_graph();
  OracleNoiseModel model;
  model.base_accuracy = 0.68;
  model.seed = 9;
  const auto km = kmeans(g.features, 7, 9);
  auto backend = make_simulated_backend(g, model, c_density(g.features, km));
  const auto nodes = select_random(g.node_count, 140, 9);
  AnnotateOptions options;
  for (auto _ : state) benchmark::DoNotOptimize(annotate_batch(*backend, g, nodes, options));
}
BENCHMARK(BM_SimulatedAnnotateBatch);

static void BM_ParseResponse(benchmark::State& state) {
  const std::vector<std::string> classes = {"agents", "machine learning", "information retrieval",
                                            "database", "human computer interaction",
                                            "artificial intelligence"};
  const std::string raw =
      R"(Sure, here are my guesses: [{"answer": "agents", "confidence": 60}, )"
      R"({"answer": "artificial intelligence", "confidence": 30}, )"
      R"({"answer": "human computer interaction", "confidence": 10}])";
  for (auto _ : state) benchmark::DoNotOptimize(parse_response(raw, classes));
}
BENCHMARK(BM_ParseResponse);

BENCHMARK_MAIN();
