#include <doctest.h>

#include <cmath>

#include "annograph/bundle.hpp"
#include "annograph/errors.hpp"
#include "annograph/graph.hpp"
#include "annograph/synthetic.hpp"
#include "support.hpp"

using namespace annograph;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

void write_tiny_bundle(const TempDir& dir, const std::string& edges = "a\tb\nb\tc\n") {
  write_file(dir.path / "classes.json", R"(["yes", "no"])");
  write_file(dir.path / "nodes.jsonl",
             "{\"id\": \"a\", \"text\": \"alpha\", \"gold\": \"yes\"}\n"
             "{\"id\": \"b\", \"text\": \"beta\"}\n"
             "{\"id\": \"c\", \"text\": \"gamma\", \"gold\": \"no\"}\n");
  write_file(dir.path / "edges.tsv", edges);
  write_file(dir.path / "features.csv", "dim=4\n1,0,0,0\n0,1,0,0\n0,0,1,0.5\n");
}

}  // namespace

TEST_SUITE_BEGIN("graph");

TEST_CASE("bundle load echoes declared sizes") {
  TempDir dir("bundle_tiny");
  write_tiny_bundle(dir);
  const auto g = load_graph_bundle(dir.str());
  CHECK(g.node_count == 3);
  CHECK(g.edges.size() == 2);
  CHECK(g.feature_dim() == 4);
  CHECK(g.class_count() == 2);
  CHECK(g.gold_labels == std::vector<int>{0, -1, 1});
  CHECK(g.texts[1] == "beta");
}

TEST_CASE("edge endpoint outside the node set is an error") {
  TempDir dir("bundle_badedge");
  write_tiny_bundle(dir, "a\tz\n");
  CHECK_THROWS_WITH_AS(load_graph_bundle(dir.str()),
                       doctest::Contains("edge endpoint out of range"), ConfigError);
}

TEST_CASE("self loops are rejected at ingest") {
  TempDir dir("bundle_selfloop");
  write_tiny_bundle(dir, "a\ta\n");
  CHECK_THROWS_WITH_AS(load_graph_bundle(dir.str()), doctest::Contains("self-loop"), ConfigError);
}

TEST_CASE("missing file and dimension mismatch are reported with the file name") {
  TempDir dir("bundle_missing");
  write_tiny_bundle(dir);
  std::filesystem::remove(dir.path / "features.csv");
  CHECK_THROWS_WITH_AS(load_graph_bundle(dir.str()), doctest::Contains("features.csv"),
                       ConfigError);

  write_file(dir.path / "features.csv", "dim=4\n1,0,0\n0,1,0,0\n0,0,1,0.5\n");
  CHECK_THROWS_WITH_AS(load_graph_bundle(dir.str()), doctest::Contains("dimension mismatch"),
                       ConfigError);
}

TEST_CASE("non-finite feature values are rejected") {
  TempDir dir("bundle_nan");
  write_tiny_bundle(dir);
  write_file(dir.path / "features.csv", "dim=4\n1,0,0,0\n0,nan,0,0\n0,0,1,0.5\n");
  CHECK_THROWS_WITH_AS(load_graph_bundle(dir.str()), doctest::Contains("non-finite"), ConfigError);
}

TEST_CASE("directed duplicates collapse with a warning") {
  TempDir dir("bundle_directed");
  write_tiny_bundle(dir, "a\tb\nb\ta\nb\tc\n");
  WarningSink warnings;
  const auto g = load_graph_bundle(dir.str(), &warnings);
  CHECK(g.edges.size() == 2);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("symmetrized") != std::string::npos);
}

TEST_CASE("cora-scale synthetic bundle echoes the citation-benchmark shape") {
  const auto g = make_synthetic_tag(cora_like_config(3));
  CHECK(g.node_count == 2708);
  CHECK(g.edges.size() == 5429);
  CHECK(g.class_count() == 7);
}

TEST_CASE("load-save-load round-trips to an identical graph") {
  TempDir dir("bundle_roundtrip");
  write_tiny_bundle(dir);
  const auto first = load_graph_bundle(dir.str());
  TempDir copy("bundle_roundtrip_copy");
  save_graph_bundle(first, copy.str());
  const auto second = load_graph_bundle(copy.str());
  CHECK(first == second);

  // also through a synthetic graph with provenance metadata
  SyntheticTagConfig cfg;
  cfg.nodes = 40;
  cfg.classes = 3;
  cfg.edges = 60;
  cfg.seed = 11;
  const auto synth = make_synthetic_tag(cfg);
  TempDir synth_dir("bundle_roundtrip_synth");
  save_graph_bundle(synth, synth_dir.str());
  CHECK(load_graph_bundle(synth_dir.str()) == synth);
}

TEST_CASE("normalized adjacency of isolated nodes is the identity") {
  TextAttributedGraph g;
  g.node_count = 2;
  g.features = Matrix(2, 1);
  g.class_names = {"a", "b"};
  const auto adj = normalized_adjacency(g);
  REQUIRE(adj.nnz() == 2);
  CHECK(adj.val[0] == 1.0);
  CHECK(adj.val[1] == 1.0);
  CHECK(adj.col[0] == 0);
  CHECK(adj.col[1] == 1);
}

TEST_CASE("normalized adjacency on a single edge gives all entries 1/2") {
  TextAttributedGraph g;
  g.node_count = 2;
  g.features = Matrix(2, 1);
  g.class_names = {"a", "b"};
  g.edges = {{0, 1}};
  const auto adj = normalized_adjacency(g);
  REQUIRE(adj.nnz() == 4);
  for (double v : adj.val) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("path graph entry (0,1) equals 1/sqrt(2*3)") {
  TextAttributedGraph g;
  g.node_count = 3;
  g.features = Matrix(3, 1);
  g.class_names = {"a", "b"};
  g.edges = {{0, 1}, {1, 2}};
  const auto adj = normalized_adjacency(g);
  double entry01 = 0.0;
  for (std::size_t e = adj.row_ptr[0]; e < adj.row_ptr[1]; ++e)
    if (adj.col[e] == 1) entry01 = adj.val[e];
  CHECK(entry01 == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
}

TEST_CASE("normalized adjacency is symmetric to the bit") {
  const auto g = testsupport::random_graph(60, 150, 3, 2, 99);
  const auto adj = normalized_adjacency(g);
  for (std::size_t i = 0; i < adj.dim; ++i) {
    for (std::size_t e = adj.row_ptr[i]; e < adj.row_ptr[i + 1]; ++e) {
      const std::uint32_t j = adj.col[e];
      double mirror = -1.0;
      for (std::size_t f = adj.row_ptr[j]; f < adj.row_ptr[j + 1]; ++f)
        if (adj.col[f] == i) mirror = adj.val[f];
      CHECK(adj.val[e] == mirror);
    }
  }
}

TEST_CASE("degrees: isolated, star, and the handshake identity") {
  TextAttributedGraph star;
  star.node_count = 5;
  star.features = Matrix(5, 1);
  star.class_names = {"a", "b"};
  star.edges = {{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const auto deg = degrees(star);
  CHECK(deg[0] == 4);
  for (int i = 1; i < 5; ++i) CHECK(deg[i] == 1);

  TextAttributedGraph isolated;
  isolated.node_count = 1;
  isolated.features = Matrix(1, 1);
  isolated.class_names = {"a", "b"};
  CHECK(degrees(isolated)[0] == 0);

  const auto g = testsupport::random_graph(80, 200, 2, 2, 5);
  std::size_t total = 0;
  for (auto d : degrees(g)) total += d;
  CHECK(total == 2 * g.edges.size());
}

TEST_CASE("pagerank is uniform on regular symmetric graphs") {
  // 6-cycle
  TextAttributedGraph g;
  g.node_count = 6;
  g.features = Matrix(6, 1);
  g.class_names = {"a", "b"};
  for (std::uint32_t i = 0; i < 6; ++i)
    g.edges.push_back({std::min(i, (i + 1) % 6), std::max(i, (i + 1) % 6)});
  std::sort(g.edges.begin(), g.edges.end());
  const auto pr = pagerank(g);
  CHECK(pr.converged);
  for (double v : pr.values) CHECK(v == doctest::Approx(1.0 / 6).epsilon(1e-9));

  TextAttributedGraph pair;
  pair.node_count = 2;
  pair.features = Matrix(2, 1);
  pair.class_names = {"a", "b"};
  pair.edges = {{0, 1}};
  const auto pr2 = pagerank(pair, 0.85);
  CHECK(pr2.values[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pr2.values[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pagerank matches the dense power-iteration oracle") {
  const auto g = testsupport::random_graph(50, 120, 2, 2, 17);
  const auto pr = pagerank(g, 0.85, 1e-12, 500);
  const auto oracle = testsupport::dense_pagerank_oracle(g, 0.85, 1e-12, 500);
  for (std::size_t i = 0; i < g.node_count; ++i)
    CHECK(std::abs(pr.values[i] - oracle[i]) < 1e-8);
}

TEST_CASE("pagerank sums to one, stays non-negative, flags non-convergence") {
  const auto g = testsupport::random_graph(40, 80, 2, 2, 23);
  const auto pr = pagerank(g);
  double total = 0.0;
  for (double v : pr.values) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

  const auto truncated = pagerank(g, 0.85, 1e-15, 1);
  CHECK_FALSE(truncated.converged);
  CHECK(truncated.iterations == 1);
  CHECK(truncated.values.size() == g.node_count);  // last iterate, not a failure
}

TEST_CASE("propagate: identity cases and the dense-product oracle") {
  TextAttributedGraph g;
  g.node_count = 3;
  g.features = Matrix(3, 2);
  g.class_names = {"a", "b"};
  g.edges = {{0, 1}, {1, 2}};
  g.features(0, 0) = 1.0;
  g.features(1, 1) = 2.0;
  g.features(2, 0) = -3.0;
  const auto adj = normalized_adjacency(g);

  CHECK(propagate(g.features, adj, 0) == g.features);

  // dense reference multiply
  double dense[3][3] = {};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t e = adj.row_ptr[i]; e < adj.row_ptr[i + 1]; ++e)
      dense[i][adj.col[e]] = adj.val[e];
  const auto once = propagate(g.features, adj, 1);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      double want = 0.0;
      for (std::size_t j = 0; j < 3; ++j) want += dense[i][j] * g.features(j, c);
      CHECK(once(i, c) == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("propagate hop counts compose") {
  const auto g = testsupport::random_graph(30, 60, 4, 2, 7);
  const auto adj = normalized_adjacency(g);
  const auto all_at_once = propagate(g.features, adj, 5);
  const auto split = propagate(propagate(g.features, adj, 2), adj, 3);
  for (std::size_t i = 0; i < all_at_once.rows(); ++i)
    for (std::size_t j = 0; j < all_at_once.cols(); ++j)
      CHECK(std::abs(all_at_once(i, j) - split(i, j)) < 1e-10);
}

TEST_SUITE_END();
