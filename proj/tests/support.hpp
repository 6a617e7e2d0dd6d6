#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "annograph/graph.hpp"
#include "annograph/matrix.hpp"
#include "annograph/rng.hpp"

namespace testsupport {

// Scratch directory wiped on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("annograph_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }

  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

// Erdos-Renyi-ish undirected graph with uniform random features.
inline annograph::TextAttributedGraph random_graph(std::size_t nodes, std::size_t edges,
                                                   std::size_t dim, std::size_t classes,
                                                   std::uint64_t seed) {
  annograph::Rng rng(seed);
  annograph::TextAttributedGraph g;
  g.node_count = nodes;
  g.features = annograph::Matrix(nodes, dim);
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = 0; j < dim; ++j) g.features(i, j) = rng.next_double() * 2.0 - 1.0;
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::size_t guard = 0;
  while (seen.size() < edges && guard++ < edges * 100) {
    auto a = static_cast<std::uint32_t>(rng.next_below(nodes));
    auto b = static_cast<std::uint32_t>(rng.next_below(nodes));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    seen.insert({a, b});
  }
  g.edges.assign(seen.begin(), seen.end());
  for (std::size_t c = 0; c < classes; ++c) g.class_names.push_back("c" + std::to_string(c));
  g.gold_labels.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i)
    g.gold_labels[i] = static_cast<int>(rng.next_below(classes));
  for (std::size_t i = 0; i < nodes; ++i) g.node_ids.push_back("n" + std::to_string(i));
  return g;
}

// Dense power-iteration reference for pagerank, independent of the sparse path.
inline std::vector<double> dense_pagerank_oracle(const annograph::TextAttributedGraph& g,
                                                 double damping, double tolerance, int max_iter) {
  const std::size_t n = g.node_count;
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  std::vector<std::size_t> deg(n, 0);
  for (auto [a, b] : g.edges) {
    ++deg[a];
    ++deg[b];
  }
  for (auto [a, b] : g.edges) {
    m[b][a] = 1.0 / static_cast<double>(deg[a]);
    m[a][b] = 1.0 / static_cast<double>(deg[b]);
  }
  std::vector<double> p(n, 1.0 / static_cast<double>(n)), next(n);
  for (int it = 0; it < max_iter; ++it) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (deg[i] == 0) dangling += p[i];
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += m[i][j] * p[j];
      next[i] = (1.0 - damping + damping * dangling) / static_cast<double>(n) + damping * acc;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - p[i]));
    p = next;
    if (change < tolerance) break;
  }
  double total = 0.0;
  for (double v : p) total += v;
  for (double& v : p) v /= total;
  return p;
}

// Well-separated Gaussian blobs.
inline annograph::Matrix blob_features(std::size_t per_blob, std::size_t blobs, std::size_t dim,
                                       double spread, double sigma, std::uint64_t seed) {
  annograph::Rng rng(seed);
  annograph::Matrix centers(blobs, dim);
  for (std::size_t b = 0; b < blobs; ++b)
    for (std::size_t j = 0; j < dim; ++j) centers(b, j) = spread * rng.next_normal();
  annograph::Matrix x(per_blob * blobs, dim);
  for (std::size_t b = 0; b < blobs; ++b)
    for (std::size_t i = 0; i < per_blob; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        x(b * per_blob + i, j) = centers(b, j) + sigma * rng.next_normal();
  return x;
}

}  // namespace testsupport
