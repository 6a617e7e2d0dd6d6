#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "annograph/matrix.hpp"

namespace annograph {

// A text-attributed graph: undirected topology, dense node features, optional
// raw texts and gold labels. Gold labels exist for evaluation and the
// simulated oracle only; selection and training never read them. Immutable
// after construction and safe to share across threads.
struct TextAttributedGraph {
  std::size_t node_count = 0;
  // Undirected edges stored once each as (min, max), sorted, no duplicates,
  // no self loops.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  Matrix features;
  std::vector<std::string> texts;       // empty when the bundle has no texts
  std::vector<int> gold_labels;         // empty when absent; -1 = unknown node
  std::vector<std::string> node_ids;    // external ids, row order = node index
  std::vector<std::string> class_names; // size C >= 2
  std::string embedding_provenance;     // carried through from the manifest, uninterpreted

  std::size_t feature_dim() const { return features.cols(); }
  std::size_t class_count() const { return class_names.size(); }
  bool has_gold() const { return !gold_labels.empty(); }

  // Throws ConfigError on any violated invariant (endpoint range, duplicate or
  // self-loop edges, non-finite features, gold label out of range).
  void validate() const;

  bool operator==(const TextAttributedGraph&) const = default;
};

// Symmetric normalized adjacency with self loops, CSR layout. Entry (i, j)
// is 1/sqrt((deg_i + 1) * (deg_j + 1)) with deg the raw degree.
struct SparseNormalizedAdjacency {
  std::size_t dim = 0;
  std::vector<std::size_t> row_ptr;  // size dim + 1
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return col.size(); }
};

SparseNormalizedAdjacency normalized_adjacency(const TextAttributedGraph& graph);

// Raw degrees, self loops excluded.
std::vector<std::uint32_t> degrees(const TextAttributedGraph& graph);

struct PageRankResult {
  std::vector<double> values;  // L1-normalized, non-negative
  int iterations = 0;
  bool converged = false;
};

// Power iteration on the undirected random walk with uniform teleport and
// uniform redistribution of dangling (isolated-node) mass. Non-convergence
// within max_iter is reported through `converged`, not an error.
PageRankResult pagerank(const TextAttributedGraph& graph, double damping = 0.85,
                        double tolerance = 1e-10, int max_iter = 200);

// adj^hops * features. hops = 0 returns the input unchanged.
Matrix propagate(const Matrix& features, const SparseNormalizedAdjacency& adj, int hops);

// Dense matrix-vector style product y = adj * x, shared by pagerank oracle
// checks and propagation.
Matrix spmm(const SparseNormalizedAdjacency& adj, const Matrix& dense);

}  // namespace annograph
