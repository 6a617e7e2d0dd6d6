#include "annograph/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "annograph/errors.hpp"
#include "annograph/rng.hpp"

namespace annograph {

TextAttributedGraph make_synthetic_tag(const SyntheticTagConfig& config) {
  if (config.classes < 2) throw ConfigError("synthetic tag: need at least 2 classes");
  if (config.nodes < config.classes) throw ConfigError("synthetic tag: fewer nodes than classes");

  Rng rng(derive_seed(config.seed, "synthetic"));
  const std::size_t n = config.nodes;
  const std::size_t c = config.classes;
  const std::size_t d = config.feature_dim;

  TextAttributedGraph graph;
  graph.node_count = n;
  graph.class_names.reserve(c);
  for (std::size_t k = 0; k < c; ++k) graph.class_names.push_back("class_" + std::to_string(k));

  // per-class node counts
  std::vector<double> weights = config.class_weights;
  if (weights.empty()) weights.assign(c, 1.0);
  if (weights.size() != c) throw ConfigError("synthetic tag: class_weights size mismatch");
  double total_weight = 0.0;
  for (double w : weights) total_weight += w;
  std::vector<std::size_t> counts(c, 1);
  std::size_t assigned = c;
  for (std::size_t k = 0; k < c && assigned < n; ++k) {
    const auto extra = std::min<std::size_t>(
        n - assigned, static_cast<std::size_t>(weights[k] / total_weight * (n - c)));
    counts[k] += extra;
    assigned += extra;
  }
  for (std::size_t k = 0; assigned < n; k = (k + 1) % c) {
    ++counts[k];
    ++assigned;
  }

  graph.gold_labels.reserve(n);
  for (std::size_t k = 0; k < c; ++k)
    graph.gold_labels.insert(graph.gold_labels.end(), counts[k], static_cast<int>(k));

  // blob centers and features
  Matrix centers(c, d);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t j = 0; j < d; ++j) centers(k, j) = config.center_scale * rng.next_normal();
  graph.features = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(graph.gold_labels[i]);
    const double radius =
        config.radius_jitter_min +
        (config.radius_jitter_max - config.radius_jitter_min) *
            std::pow(rng.next_double(), config.radius_jitter_power);
    for (std::size_t j = 0; j < d; ++j)
      graph.features(i, j) = centers(k, j) + radius * config.noise_sigma * rng.next_normal();
  }

  // class-partitioned node lists for homophilous edge sampling
  std::vector<std::vector<std::uint32_t>> members(c);
  for (std::size_t i = 0; i < n; ++i)
    members[static_cast<std::size_t>(graph.gold_labels[i])].push_back(
        static_cast<std::uint32_t>(i));

  std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set;
  const std::size_t wanted = std::min(config.edges, n * (n - 1) / 2);
  std::size_t guard = 0;
  while (edge_set.size() < wanted && guard < wanted * 200) {
    ++guard;
    std::uint32_t a, b;
    if (rng.next_double() < config.homophily) {
      const auto& pool = members[static_cast<std::size_t>(rng.next_below(c))];
      if (pool.size() < 2) continue;
      a = pool[rng.next_below(pool.size())];
      b = pool[rng.next_below(pool.size())];
    } else {
      a = static_cast<std::uint32_t>(rng.next_below(n));
      b = static_cast<std::uint32_t>(rng.next_below(n));
    }
    if (a == b) continue;
    const auto key = std::minmax(a, b);
    edge_set.insert({key.first, key.second});
  }
  graph.edges.assign(edge_set.begin(), edge_set.end());

  graph.node_ids.reserve(n);
  graph.texts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    graph.node_ids.push_back("n" + std::to_string(i));
    graph.texts.push_back("Synthetic record " + std::to_string(i) + " from a blob feature cloud.");
  }
  graph.embedding_provenance = "synthetic-blobs-v1";
  graph.validate();
  return graph;
}

SyntheticTagConfig cora_like_config(std::uint64_t seed) {
  SyntheticTagConfig config;
  config.nodes = 2708;
  config.classes = 7;
  config.feature_dim = 32;
  config.center_scale = 0.6;
  config.noise_sigma = 1.0;
  config.edges = 5429;
  config.homophily = 0.81;
  config.class_weights = {818, 426, 418, 351, 298, 217, 180};
  config.radius_jitter_min = 0.05;
  config.radius_jitter_max = 3.5;
  config.radius_jitter_power = 2.0;
  config.seed = seed;
  return config;
}

SyntheticTagConfig pubmed_like_config(std::uint64_t seed) {
  SyntheticTagConfig config;
  config.nodes = 1500;
  config.classes = 3;
  config.feature_dim = 32;
  config.center_scale = 0.55;
  config.noise_sigma = 1.0;
  config.edges = 3400;
  config.homophily = 0.8;
  config.class_weights = {0.4, 0.4, 0.2};
  config.radius_jitter_min = 0.05;
  config.radius_jitter_max = 3.0;
  config.radius_jitter_power = 2.0;
  config.seed = seed;
  return config;
}

}  // namespace annograph
