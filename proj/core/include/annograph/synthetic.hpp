#pragma once

#include <cstdint>
#include <vector>

#include "annograph/graph.hpp"

namespace annograph {

// Gaussian-blob text-attributed graph: one feature blob per class, edges drawn
// mostly within classes. Gold labels, ids and short synthetic texts included,
// so the bundle works end to end with the simulated oracle.
struct SyntheticTagConfig {
  std::size_t nodes = 2000;
  std::size_t classes = 8;
  std::size_t feature_dim = 32;
  double center_scale = 4.0;      // distance scale between blob centers
  double noise_sigma = 1.0;       // within-blob std per coordinate
  std::size_t edges = 6000;
  double homophily = 0.8;         // probability an edge stays within a class
  std::vector<double> class_weights;  // optional imbalance; empty = balanced
  // per-node radial multiplier min + (max-min) * u^power with u uniform;
  // power > 1 clumps most nodes into a dense core and leaves a long tail,
  // the shape document-embedding clouds tend to have
  double radius_jitter_min = 1.0;
  double radius_jitter_max = 1.0;
  double radius_jitter_power = 1.0;
  std::uint64_t seed = 0;
};

TextAttributedGraph make_synthetic_tag(const SyntheticTagConfig& config);

// Citation-network-scale preset: 2708 nodes, 5429 edges, 7 imbalanced classes.
SyntheticTagConfig cora_like_config(std::uint64_t seed);

// Three-class medical-abstract-scale preset at desk size.
SyntheticTagConfig pubmed_like_config(std::uint64_t seed);

}  // namespace annograph
