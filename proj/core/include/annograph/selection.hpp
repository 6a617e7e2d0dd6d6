#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "annograph/clustering.hpp"
#include "annograph/graph.hpp"

namespace annograph {

struct ScoreVector {
  std::vector<double> values;  // per node, finite
  std::string method;
};

// Per-node rank percentile in [0, 1], oriented so the highest underlying
// score maps to 1.0 and the lowest to 0.0; ties share the mean of their
// positional percentiles. A single node yields 1.0.
struct RankPercentile {
  std::vector<double> values;
};

enum class SelectionMethod { random, density, degree, pagerank, age, featprop };

std::string to_string(SelectionMethod method);
SelectionMethod selection_method_from_string(const std::string& name);

struct SelectionConfig {
  SelectionMethod method = SelectionMethod::random;
  std::uint32_t budget = 0;     // 0 = resolved to 20 x class count by the pipeline
  double alpha0 = 1.0;          // weight on the base score rank
  double alpha1 = 1.0;          // weight on the C-Density rank
  double age_gamma = 0.5;
  int featprop_hops = 2;
  std::uint64_t seed = 0;
  bool difficulty_aware = false;
  std::uint32_t cdensity_k = 0;  // 0 = class count
  bool l2_normalize_features = false;
};

RankPercentile rank_percentile(const ScoreVector& scores);

// Uniform without replacement; result sorted ascending. The stream is the
// documented Fisher-Yates prefix of Rng(seed) over [0, node_count).
std::vector<std::uint32_t> select_random(std::size_t node_count, std::uint32_t budget,
                                         std::uint64_t seed);

// 1 / (1 + distance to the nearest of k-means centers with k = budget).
ScoreVector score_density(const TextAttributedGraph& graph, std::uint32_t budget,
                          std::uint64_t seed);

ScoreVector score_degree(const TextAttributedGraph& graph);

ScoreVector score_pagerank(const TextAttributedGraph& graph);

// gamma * rank(density of 2-hop aggregated features, k = class count)
// + (1 - gamma) * rank(pagerank).
ScoreVector score_age(const TextAttributedGraph& graph, double gamma, std::uint64_t seed);

// Density score over hop-propagated features with k = budget centers; the
// rank source when FeatProp participates in difficulty-aware combination.
ScoreVector score_featprop(const TextAttributedGraph& graph, std::uint32_t budget, int hops,
                           std::uint64_t seed);

// k-means on propagated features with k = budget, then each cluster
// contributes the unselected node nearest its center.
std::vector<std::uint32_t> select_featprop(const TextAttributedGraph& graph, std::uint32_t budget,
                                           int hops, std::uint64_t seed);

// alpha0 * rank(base) + alpha1 * rank(cdensity).
ScoreVector apply_difficulty_aware(const ScoreVector& base, const ScoreVector& cdensity,
                                   double alpha0, double alpha1);

// B highest-scoring nodes; ties broken by a seeded shuffle key, then index.
// Result sorted ascending.
std::vector<std::uint32_t> select_top_b(const ScoreVector& scores, std::uint32_t budget,
                                        std::uint64_t seed);

// C-Density scores for difficulty-aware combination and post-filtering:
// k-means with k = (cdensity_k ? cdensity_k : class count) on (optionally
// row-normalized) raw features.
ScoreVector cdensity_scores(const TextAttributedGraph& graph, const SelectionConfig& config);

// Full strategy dispatch: base scores or direct selection per config.method,
// optional difficulty-aware combination, top-B cut.
std::vector<std::uint32_t> run_selection(const TextAttributedGraph& graph,
                                         const SelectionConfig& config);

}  // namespace annograph
