#include "annograph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "annograph/errors.hpp"

namespace annograph {

void TextAttributedGraph::validate() const {
  if (class_names.size() < 2) throw ConfigError("graph: need at least 2 classes");
  if (features.rows() != node_count)
    throw ConfigError("graph: feature row count " + std::to_string(features.rows()) +
                      " does not match node count " + std::to_string(node_count));
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (double v : features.row(i))
      if (!std::isfinite(v))
        throw ConfigError("graph: non-finite feature at node " + std::to_string(i));
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (auto [a, b] : edges) {
    if (a >= node_count || b >= node_count) throw ConfigError("graph: edge endpoint out of range");
    if (a == b) throw ConfigError("graph: self loop at node " + std::to_string(a));
    auto key = std::minmax(a, b);
    if (!seen.insert({key.first, key.second}).second)
      throw ConfigError("graph: duplicate undirected edge");
  }
  if (!texts.empty() && texts.size() != node_count)
    throw ConfigError("graph: text count does not match node count");
  if (!gold_labels.empty()) {
    if (gold_labels.size() != node_count) throw ConfigError("graph: gold label count mismatch");
    for (int y : gold_labels)
      if (y != -1 && (y < 0 || static_cast<std::size_t>(y) >= class_names.size()))
        throw ConfigError("graph: gold label out of range");
  }
}

std::vector<std::uint32_t> degrees(const TextAttributedGraph& graph) {
  std::vector<std::uint32_t> deg(graph.node_count, 0);
  for (auto [a, b] : graph.edges) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

SparseNormalizedAdjacency normalized_adjacency(const TextAttributedGraph& graph) {
  const std::size_t n = graph.node_count;
  const auto deg = degrees(graph);

  // Neighbor lists including the self loop, sorted per row.
  std::vector<std::vector<std::uint32_t>> nbr(n);
  for (std::size_t i = 0; i < n; ++i) nbr[i].push_back(static_cast<std::uint32_t>(i));
  for (auto [a, b] : graph.edges) {
    nbr[a].push_back(b);
    nbr[b].push_back(a);
  }

  SparseNormalizedAdjacency adj;
  adj.dim = n;
  adj.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(nbr[i].begin(), nbr[i].end());
    adj.row_ptr[i + 1] = adj.row_ptr[i] + nbr[i].size();
  }
  adj.col.reserve(adj.row_ptr[n]);
  adj.val.reserve(adj.row_ptr[n]);
  // product inside one sqrt keeps (i,j) and (j,i) bit-identical
  for (std::size_t i = 0; i < n; ++i) {
    const double di = static_cast<double>(deg[i]) + 1.0;
    for (std::uint32_t j : nbr[i]) {
      adj.col.push_back(j);
      adj.val.push_back(1.0 / std::sqrt(di * (static_cast<double>(deg[j]) + 1.0)));
    }
  }
  return adj;
}

Matrix spmm(const SparseNormalizedAdjacency& adj, const Matrix& dense) {
  if (adj.dim != dense.rows()) throw ConfigError("spmm: dimension mismatch");
  Matrix out(adj.dim, dense.cols());
  for (std::size_t i = 0; i < adj.dim; ++i) {
    auto out_row = out.row(i);
    for (std::size_t e = adj.row_ptr[i]; e < adj.row_ptr[i + 1]; ++e) {
      const double w = adj.val[e];
      const auto in_row = dense.row(adj.col[e]);
      for (std::size_t c = 0; c < dense.cols(); ++c) out_row[c] += w * in_row[c];
    }
  }
  return out;
}

Matrix propagate(const Matrix& features, const SparseNormalizedAdjacency& adj, int hops) {
  if (hops < 0) throw ConfigError("propagate: negative hop count");
  if (features.rows() != adj.dim) throw ConfigError("propagate: dimension mismatch");
  Matrix out = features;
  for (int h = 0; h < hops; ++h) out = spmm(adj, out);
  return out;
}

PageRankResult pagerank(const TextAttributedGraph& graph, double damping, double tolerance,
                        int max_iter) {
  if (graph.node_count == 0) throw ConfigError("pagerank: empty graph");
  if (damping <= 0.0 || damping >= 1.0) throw ConfigError("pagerank: damping must be in (0,1)");
  if (tolerance <= 0.0 || max_iter <= 0) throw ConfigError("pagerank: invalid tolerance/max_iter");

  const std::size_t n = graph.node_count;
  const auto deg = degrees(graph);

  PageRankResult result;
  result.values.assign(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);

  for (int it = 0; it < max_iter; ++it) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (deg[i] == 0) dangling += result.values[i];
    const double base = (1.0 - damping + damping * dangling) / static_cast<double>(n);
    std::fill(next.begin(), next.end(), base);
    for (auto [a, b] : graph.edges) {
      next[b] += damping * result.values[a] / static_cast<double>(deg[a]);
      next[a] += damping * result.values[b] / static_cast<double>(deg[b]);
    }
    double max_change = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      max_change = std::max(max_change, std::abs(next[i] - result.values[i]));
    result.values.swap(next);
    result.iterations = it + 1;
    if (max_change < tolerance) {
      result.converged = true;
      break;
    }
  }

  double total = 0.0;
  for (double v : result.values) total += v;
  for (double& v : result.values) v /= total;
  return result;
}

}  // namespace annograph
