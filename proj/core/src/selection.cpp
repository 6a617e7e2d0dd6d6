#include "annograph/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "annograph/errors.hpp"
#include "annograph/rng.hpp"

namespace annograph {

std::string to_string(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::random: return "random";
    case SelectionMethod::density: return "density";
    case SelectionMethod::degree: return "degree";
    case SelectionMethod::pagerank: return "pagerank";
    case SelectionMethod::age: return "age";
    case SelectionMethod::featprop: return "featprop";
  }
  return "unknown";
}

SelectionMethod selection_method_from_string(const std::string& name) {
  if (name == "random") return SelectionMethod::random;
  if (name == "density") return SelectionMethod::density;
  if (name == "degree") return SelectionMethod::degree;
  if (name == "pagerank") return SelectionMethod::pagerank;
  if (name == "age") return SelectionMethod::age;
  if (name == "featprop") return SelectionMethod::featprop;
  throw ConfigError("unknown selection method '" + name + "'");
}

RankPercentile rank_percentile(const ScoreVector& scores) {
  const std::size_t n = scores.values.size();
  if (n == 0) throw ConfigError("rank_percentile: empty score vector");
  for (double v : scores.values)
    if (!std::isfinite(v)) throw ConfigError("rank_percentile: non-finite score");

  RankPercentile out;
  out.values.assign(n, 1.0);
  if (n == 1) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.values[a] > scores.values[b];
  });

  // ties share the mean of their 0-indexed positions from the top
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores.values[order[j + 1]] == scores.values[order[i]]) ++j;
    const double mean_pos = static_cast<double>(i + j) / 2.0;
    const double pct = (static_cast<double>(n - 1) - mean_pos) / static_cast<double>(n - 1);
    for (std::size_t k = i; k <= j; ++k) out.values[order[k]] = pct;
    i = j + 1;
  }
  return out;
}

std::vector<std::uint32_t> select_random(std::size_t node_count, std::uint32_t budget,
                                         std::uint64_t seed) {
  if (budget > node_count) throw ConfigError("select_random: budget exceeds node count");
  Rng rng(seed);
  return rng.sample_without_replacement(node_count, budget);
}

ScoreVector score_density(const TextAttributedGraph& graph, std::uint32_t budget,
                          std::uint64_t seed) {
  const auto model = kmeans(graph.features, budget, seed);
  auto dist = nearest_center_distance(graph.features, model.centers);
  ScoreVector out{{}, "density"};
  out.values.reserve(dist.size());
  for (double d : dist) out.values.push_back(1.0 / (1.0 + d));
  return out;
}

ScoreVector score_degree(const TextAttributedGraph& graph) {
  const auto deg = degrees(graph);
  ScoreVector out{{}, "degree"};
  out.values.assign(deg.begin(), deg.end());
  return out;
}

ScoreVector score_pagerank(const TextAttributedGraph& graph) {
  return {pagerank(graph).values, "pagerank"};
}

ScoreVector score_age(const TextAttributedGraph& graph, double gamma, std::uint64_t seed) {
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("score_age: gamma must be in [0,1]");
  const auto adj = normalized_adjacency(graph);
  const Matrix aggregated = propagate(graph.features, adj, 2);
  const auto model =
      kmeans(aggregated, static_cast<std::uint32_t>(graph.class_count()), seed);
  auto dist = nearest_center_distance(aggregated, model.centers);
  ScoreVector density{{}, "age_density"};
  density.values.reserve(dist.size());
  for (double d : dist) density.values.push_back(1.0 / (1.0 + d));

  const auto density_rank = rank_percentile(density);
  const auto pr_rank = rank_percentile(score_pagerank(graph));

  ScoreVector out{{}, "age"};
  out.values.resize(graph.node_count);
  for (std::size_t i = 0; i < graph.node_count; ++i)
    out.values[i] = gamma * density_rank.values[i] + (1.0 - gamma) * pr_rank.values[i];
  return out;
}

ScoreVector score_featprop(const TextAttributedGraph& graph, std::uint32_t budget, int hops,
                           std::uint64_t seed) {
  const auto adj = normalized_adjacency(graph);
  const Matrix aggregated = propagate(graph.features, adj, hops);
  const auto model = kmeans(aggregated, budget, seed);
  auto dist = nearest_center_distance(aggregated, model.centers);
  ScoreVector out{{}, "featprop"};
  out.values.reserve(dist.size());
  for (double d : dist) out.values.push_back(1.0 / (1.0 + d));
  return out;
}

std::vector<std::uint32_t> select_featprop(const TextAttributedGraph& graph, std::uint32_t budget,
                                           int hops, std::uint64_t seed) {
  if (budget > graph.node_count) throw ConfigError("select_featprop: budget exceeds node count");
  const auto adj = normalized_adjacency(graph);
  const Matrix aggregated = propagate(graph.features, adj, hops);
  const auto model = kmeans(aggregated, budget, seed);

  std::vector<bool> taken(graph.node_count, false);
  std::vector<std::uint32_t> selected;
  selected.reserve(budget);
  for (std::uint32_t c = 0; c < budget; ++c) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t pick = graph.node_count;
    for (std::size_t i = 0; i < graph.node_count; ++i) {
      if (taken[i]) continue;
      const double d = squared_distance(aggregated.row(i), model.centers.row(c));
      if (d < best) {
        best = d;
        pick = i;
      }
    }
    taken[pick] = true;
    selected.push_back(static_cast<std::uint32_t>(pick));
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

ScoreVector apply_difficulty_aware(const ScoreVector& base, const ScoreVector& cdensity,
                                   double alpha0, double alpha1) {
  if (base.values.size() != cdensity.values.size())
    throw ConfigError("apply_difficulty_aware: length mismatch");
  if (alpha0 < 0.0 || alpha1 < 0.0 || alpha0 + alpha1 <= 0.0)
    throw ConfigError("apply_difficulty_aware: weights must be non-negative with positive sum");
  const auto base_rank = rank_percentile(base);
  const auto cd_rank = rank_percentile(cdensity);
  ScoreVector out{{}, "da-" + base.method};
  out.values.resize(base.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = alpha0 * base_rank.values[i] + alpha1 * cd_rank.values[i];
  return out;
}

std::vector<std::uint32_t> select_top_b(const ScoreVector& scores, std::uint32_t budget,
                                        std::uint64_t seed) {
  const std::size_t n = scores.values.size();
  if (budget > n) throw ConfigError("select_top_b: budget exceeds node count");

  std::vector<std::uint32_t> tiebreak(n);
  std::iota(tiebreak.begin(), tiebreak.end(), 0);
  Rng rng(seed);
  rng.shuffle(tiebreak);

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores.values[a] != scores.values[b]) return scores.values[a] > scores.values[b];
    if (tiebreak[a] != tiebreak[b]) return tiebreak[a] < tiebreak[b];
    return a < b;
  });
  order.resize(budget);
  std::sort(order.begin(), order.end());
  return order;
}

ScoreVector cdensity_scores(const TextAttributedGraph& graph, const SelectionConfig& config) {
  const std::uint32_t k =
      config.cdensity_k ? config.cdensity_k : static_cast<std::uint32_t>(graph.class_count());
  const Matrix& base = graph.features;
  const Matrix features = config.l2_normalize_features ? l2_normalize_rows(base) : base;
  const auto model = kmeans(features, k, derive_seed(config.seed, "cdensity"));
  return {c_density(features, model), "cdensity"};
}

std::vector<std::uint32_t> run_selection(const TextAttributedGraph& graph,
                                         const SelectionConfig& config) {
  const std::uint32_t budget = config.budget;
  if (budget == 0 || budget > graph.node_count)
    throw ConfigError("selection budget " + std::to_string(budget) + " invalid for " +
                      std::to_string(graph.node_count) + " nodes");

  if (config.method == SelectionMethod::random && !config.difficulty_aware)
    return select_random(graph.node_count, budget, config.seed);
  if (config.method == SelectionMethod::featprop && !config.difficulty_aware)
    return select_featprop(graph, budget, config.featprop_hops, derive_seed(config.seed, "kmeans"));

  ScoreVector base;
  const std::uint64_t kseed = derive_seed(config.seed, "kmeans");
  switch (config.method) {
    case SelectionMethod::random: {
      // uniform base scores: DA-random reduces to the C-Density ordering
      base = ScoreVector{std::vector<double>(graph.node_count, 0.0), "random"};
      break;
    }
    case SelectionMethod::density: base = score_density(graph, budget, kseed); break;
    case SelectionMethod::degree: base = score_degree(graph); break;
    case SelectionMethod::pagerank: base = score_pagerank(graph); break;
    case SelectionMethod::age: base = score_age(graph, config.age_gamma, kseed); break;
    case SelectionMethod::featprop:
      base = score_featprop(graph, budget, config.featprop_hops, kseed);
      break;
  }
  if (config.difficulty_aware) {
    const auto cd = cdensity_scores(graph, config);
    base = apply_difficulty_aware(base, cd, config.alpha0, config.alpha1);
  }
  return select_top_b(base, budget, derive_seed(config.seed, "topb"));
}

}  // namespace annograph
