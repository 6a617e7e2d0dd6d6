// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 9 needs a live API key and a real bundle and prints SKIP
// without them. Run a subset with explicit numbers: annograph_acceptance 2 7.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "annograph/annotator.hpp"
#include "annograph/bundle.hpp"
#include "annograph/eval.hpp"
#include "annograph/filtering.hpp"
#include "annograph/gcn.hpp"
#include "annograph/pipeline.hpp"
#include "annograph/rng.hpp"
#include "annograph/selection.hpp"
#include "annograph/synthetic.hpp"

using namespace annograph;
namespace fs = std::filesystem;

namespace {

enum Status { PASS, FAIL, SKIP };

struct Check {
  int number;
  std::string name;
  std::function<Status(std::string&)> run;
};

fs::path scratch_root() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() / ("annograph_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

// --------------------------------------------------------------------------
// 1. COE oracle equivalence
// --------------------------------------------------------------------------

double entropy_from_counts(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

Status coe_equivalence(std::string& detail) {
  Rng rng(20240517);
  double worst = 0.0;
  for (int round = 0; round < 200; ++round) {
    const std::size_t classes = 2 + rng.next_below(9);   // C <= 10
    const std::size_t size = 2 + rng.next_below(49);     // size <= 50
    std::vector<std::size_t> counts(classes, 0);
    LabelMultiset multiset(classes);
    for (std::size_t i = 0; i < size; ++i) {
      const auto label = static_cast<int>(rng.next_below(classes));
      ++counts[static_cast<std::size_t>(label)];
      multiset.add(label);
    }
    for (std::size_t c = 0; c < classes; ++c) {
      if (counts[c] == 0) continue;
      auto reduced = counts;
      --reduced[c];
      const double expected = entropy_from_counts(reduced) - entropy_from_counts(counts);
      worst = std::max(worst,
                       std::abs(multiset.change_of_entropy(static_cast<int>(c)) - expected));
    }
  }
  detail = fmt("max |incremental - recomputed| = %.3e over 200 multisets", worst);
  return worst < 1e-12 ? PASS : FAIL;
}

// --------------------------------------------------------------------------
// 2. PageRank dense-oracle match
// --------------------------------------------------------------------------

TextAttributedGraph random_oracle_graph(std::size_t nodes, std::size_t edges,
                                        std::uint64_t seed) {
  Rng rng(seed);
  TextAttributedGraph g;
  g.node_count = nodes;
  g.features = Matrix(nodes, 1);
  g.class_names = {"a", "b"};
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::size_t guard = 0;
  while (seen.size() < edges && guard++ < edges * 50) {
    auto a = static_cast<std::uint32_t>(rng.next_below(nodes));
    auto b = static_cast<std::uint32_t>(rng.next_below(nodes));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    seen.insert({a, b});
  }
  g.edges.assign(seen.begin(), seen.end());
  return g;
}

Status pagerank_oracle(std::string& detail) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed * 7 + 1);
    const std::size_t nodes = 20 + rng.next_below(181);  // <= 200
    const std::size_t edges = nodes + rng.next_below(nodes * 2);
    const auto g = random_oracle_graph(nodes, edges, seed + 100);

    const auto sparse = pagerank(g, 0.85, 1e-12, 1000).values;

    // dense power iteration over the explicit transition matrix
    const std::size_t n = g.node_count;
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    const auto deg = degrees(g);
    for (auto [a, b] : g.edges) {
      m[b][a] = 1.0 / deg[a];
      m[a][b] = 1.0 / deg[b];
    }
    std::vector<double> p(n, 1.0 / static_cast<double>(n)), next(n);
    for (int it = 0; it < 1000; ++it) {
      double dangling = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (deg[i] == 0) dangling += p[i];
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += m[i][j] * p[j];
        next[i] = (1.0 - 0.85 + 0.85 * dangling) / static_cast<double>(n) + 0.85 * acc;
        change = std::max(change, std::abs(next[i] - p[i]));
      }
      p.swap(next);
      if (change < 1e-12) break;
    }
    double total = 0.0;
    for (double v : p) total += v;
    for (std::size_t i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(sparse[i] - p[i] / total));
  }
  detail = fmt("max Linf(sparse, dense) = %.3e over 20 graphs", worst);
  return worst < 1e-8 ? PASS : FAIL;
}

// --------------------------------------------------------------------------
// 3. GCN gradient check
// --------------------------------------------------------------------------

Status gcn_gradient_check(std::string& detail) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 13);
    const std::size_t n = 8 + rng.next_below(13);       // <= 20
    const std::size_t dim = 2 + rng.next_below(7);      // <= 8
    const std::size_t classes = 2 + rng.next_below(3);  // <= 4
    auto g = random_oracle_graph(n, n * 2, seed + 50);
    g.features = Matrix(n, dim);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < dim; ++j) g.features(i, j) = rng.next_normal();
    const auto adj = normalized_adjacency(g);

    gcn::GcnParams params;
    const std::size_t hidden = 4;
    params.w1 = Matrix(dim, hidden);
    params.w2 = Matrix(hidden, classes);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < hidden; ++j) params.w1(i, j) = rng.next_normal() * 0.6;
    for (std::size_t i = 0; i < hidden; ++i)
      for (std::size_t j = 0; j < classes; ++j) params.w2(i, j) = rng.next_normal() * 0.6;

    std::vector<std::uint32_t> train;
    std::vector<int> labels;
    std::vector<double> weights;
    for (std::size_t i = 0; i < n; i += 2) {
      train.push_back(static_cast<std::uint32_t>(i));
      labels.push_back(static_cast<int>(rng.next_below(classes)));
      weights.push_back(0.25 + 0.75 * rng.next_double());
    }
    const double wd = 5e-4;
    const auto grads =
        gcn::gradients(adj, g.features, params, train, labels, &weights, wd, nullptr);

    const double h = 1e-5;
    auto probe = [&](Matrix gcn::GcnParams::* which, std::size_t i, std::size_t j) {
      gcn::GcnParams plus = params, minus = params;
      (plus.*which)(i, j) += h;
      (minus.*which)(i, j) -= h;
      const double up = gcn::loss_value(gcn::forward(adj, g.features, plus), train, labels,
                                        &weights, plus, wd);
      const double down = gcn::loss_value(gcn::forward(adj, g.features, minus), train, labels,
                                          &weights, minus, wd);
      return (up - down) / (2.0 * h);
    };
    for (std::size_t i = 0; i < params.w1.rows(); ++i)
      for (std::size_t j = 0; j < params.w1.cols(); ++j) {
        const double fd = probe(&gcn::GcnParams::w1, i, j);
        const double an = grads.w1(i, j);
        worst = std::max(worst, std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)}));
      }
    for (std::size_t i = 0; i < params.w2.rows(); ++i)
      for (std::size_t j = 0; j < params.w2.cols(); ++j) {
        const double fd = probe(&gcn::GcnParams::w2, i, j);
        const double an = grads.w2(i, j);
        worst = std::max(worst, std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)}));
      }
  }
  detail = fmt("max relative error vs central differences = %.3e over 5 instances", worst);
  return worst < 1e-4 ? PASS : FAIL;
}

// --------------------------------------------------------------------------
// 4. FeatProp medoid objective vs exhaustive optimum
// --------------------------------------------------------------------------

Status featprop_medoid_oracle(std::string& detail) {
  double worst_ratio = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticTagConfig cfg;
    cfg.nodes = 10;
    cfg.classes = 3;
    cfg.feature_dim = 3;
    cfg.center_scale = 6.0;
    cfg.noise_sigma = 0.5;
    cfg.edges = 10;
    cfg.homophily = 1.0;
    cfg.seed = seed;
    const auto g = make_synthetic_tag(cfg);
    const int hops = 2;
    const auto adj = normalized_adjacency(g);
    const auto aggregated = propagate(g.features, adj, hops);

    auto objective = [&](const std::vector<std::uint32_t>& medoids) {
      double total = 0.0;
      for (std::size_t i = 0; i < g.node_count; ++i) {
        double best = 1e300;
        for (auto m : medoids)
          best = std::min(best, squared_distance(aggregated.row(i), aggregated.row(m)));
        total += std::sqrt(best);
      }
      return total;
    };

    double optimum = 1e300;
    for (std::uint32_t a = 0; a < 10; ++a)
      for (std::uint32_t b = a + 1; b < 10; ++b)
        for (std::uint32_t c = b + 1; c < 10; ++c)
          optimum = std::min(optimum, objective({a, b, c}));

    const auto picked = select_featprop(g, 3, hops, derive_seed(seed, "kmeans"));
    worst_ratio = std::max(worst_ratio, objective(picked) / optimum);
  }
  detail = fmt("worst objective ratio vs exhaustive optimum = %.4f over 20 seeds", worst_ratio);
  return worst_ratio <= 1.05 ? PASS : FAIL;
}

// --------------------------------------------------------------------------
// 5 & 6 shared setup: 2000-node, 8-blob TAG with density-coupled oracle
// --------------------------------------------------------------------------

TextAttributedGraph blob_benchmark_graph() {
  SyntheticTagConfig cfg;
  cfg.nodes = 2000;
  cfg.classes = 8;
  cfg.feature_dim = 8;
  cfg.center_scale = 2.5;
  cfg.noise_sigma = 0.45;
  cfg.edges = 5000;
  cfg.homophily = 0.85;
  cfg.radius_jitter_min = 0.1;
  cfg.radius_jitter_max = 4.0;
  cfg.seed = 42;
  return make_synthetic_tag(cfg);
}

OracleNoiseModel blob_noise_model(std::uint64_t oracle_seed) {
  OracleNoiseModel model;
  model.base_accuracy = 0.35;
  model.density_slope = 0.5;
  model.confidence_calibration = 1.0;
  model.seed = oracle_seed;
  return model;
}

std::vector<double> oracle_cdensity_of(const TextAttributedGraph& g, std::uint64_t oracle_seed) {
  const auto model = kmeans(g.features, static_cast<std::uint32_t>(g.class_count()),
                            derive_seed(oracle_seed, "oracle-cdensity"));
  return c_density(g.features, model);
}

double selection_quality(const TextAttributedGraph& g, const std::vector<std::uint32_t>& nodes,
                         const OracleNoiseModel& model, const std::vector<double>& cdensity) {
  std::size_t hits = 0;
  for (auto node : nodes)
    if (simulated_annotate(g, model, cdensity, node).label_index == g.gold_labels[node]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

Status selection_quality_directional(std::string& detail) {
  const auto g = blob_benchmark_graph();
  const std::uint32_t budget = 160;  // 20 x 8 classes

  double diff_total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::uint64_t select_seed = derive_seed(seed, "select");
    const std::uint64_t oracle_seed = derive_seed(seed, "annotate");
    const auto model = blob_noise_model(oracle_seed);
    const auto cdensity = oracle_cdensity_of(g, oracle_seed);

    const auto random_nodes = select_random(g.node_count, budget, select_seed);
    SelectionConfig da;
    da.method = SelectionMethod::density;
    da.difficulty_aware = true;
    da.budget = budget;
    da.seed = select_seed;
    const auto da_nodes = run_selection(g, da);

    diff_total += selection_quality(g, da_nodes, model, cdensity) -
                  selection_quality(g, random_nodes, model, cdensity);
  }
  const double mean_diff = diff_total / 10.0;

  // decile bars over one full-graph annotation pass
  const std::uint64_t oracle_seed = derive_seed(0, "annotate");
  const auto model = blob_noise_model(oracle_seed);
  const auto cdensity = oracle_cdensity_of(g, oracle_seed);
  std::vector<Annotation> annotations;
  for (std::uint32_t node = 0; node < g.node_count; ++node)
    annotations.push_back(simulated_annotate(g, model, cdensity, node));
  std::vector<double> distance(g.node_count);
  for (std::size_t i = 0; i < g.node_count; ++i) distance[i] = 1.0 / cdensity[i] - 1.0;
  const auto deciles = density_decile_series(annotations, g.gold_labels, distance);
  std::vector<double> xs, ys;
  for (auto [x, y] : deciles.points) {
    xs.push_back(x);
    ys.push_back(y);
  }
  const double rho = spearman(xs, ys);

  detail = fmt("DA-Density - Random quality = %+.1f pts (need >= +5); decile Spearman = %.3f "
               "(need < -0.7)",
               100.0 * mean_diff, rho);
  return (mean_diff >= 0.05 && rho < -0.7) ? PASS : FAIL;
}

Status post_filter_lift(std::string& detail) {
  const auto g = blob_benchmark_graph();
  // larger sample than the 20xC convention keeps the per-seed comparison out
  // of binomial noise; the criterion fixes the removal fraction, not the budget
  const std::uint32_t budget = 800;
  const auto target = static_cast<std::uint32_t>(std::ceil(0.75 * budget));

  SelectionConfig cd_config;  // pipeline-stage C-Density over raw features
  int lift_wins = 0;
  double min_entropy_ratio = 1e300;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::uint64_t select_seed = derive_seed(seed, "select");
    const std::uint64_t oracle_seed = derive_seed(seed, "annotate");
    const auto model = blob_noise_model(oracle_seed);
    const auto oracle_cd = oracle_cdensity_of(g, oracle_seed);

    const auto selected = select_random(g.node_count, budget, select_seed);
    std::vector<int> labels;
    std::vector<double> confidences;
    std::size_t pre_hits = 0;
    for (auto node : selected) {
      const auto a = simulated_annotate(g, model, oracle_cd, node);
      labels.push_back(a.label_index);
      confidences.push_back(a.confidence);
      if (a.label_index == g.gold_labels[node]) ++pre_hits;
    }
    const double pre_quality = static_cast<double>(pre_hits) / budget;

    cd_config.seed = select_seed;
    const auto pipeline_cd = cdensity_scores(g, cd_config).values;
    FilterConfig fc;
    fc.target_size = target;
    const auto filtered =
        post_filter(selected, labels, confidences, pipeline_cd, g.class_count(), fc);

    std::size_t post_hits = 0;
    LabelMultiset pre_set(g.class_count()), post_set(g.class_count());
    for (std::size_t i = 0; i < selected.size(); ++i) pre_set.add(labels[i]);
    for (auto node : filtered.survivors) {
      const auto a = simulated_annotate(g, model, oracle_cd, node);
      post_set.add(a.label_index);
      if (a.label_index == g.gold_labels[node]) ++post_hits;
    }
    const double post_quality =
        static_cast<double>(post_hits) / static_cast<double>(filtered.survivors.size());
    if (post_quality > pre_quality) ++lift_wins;
    min_entropy_ratio = std::min(min_entropy_ratio, post_set.entropy() / pre_set.entropy());
  }
  detail = fmt("quality lift in %d/10 seeds (need >= 9); min entropy ratio %.3f (need >= 0.9)",
               lift_wins, min_entropy_ratio);
  return (lift_wins >= 9 && min_entropy_ratio >= 0.9) ? PASS : FAIL;
}

// --------------------------------------------------------------------------
// 7. End-to-end ordering on a citation-scale bundle
// --------------------------------------------------------------------------

Status table_ordering(std::string& detail) {
  const fs::path bundle_dir = scratch_root() / "cora_like_bundle";
  save_graph_bundle(make_synthetic_tag(cora_like_config(7)), bundle_dir.string());
  const auto graph = load_graph_bundle(bundle_dir.string());

  pipeline::PipelineConfig config;
  config.bundle = bundle_dir.string();
  config.seeds = {1, 2, 3};
  config.prompt.kind = PromptKind::vanilla_zero_shot;
  // density-coupled oracle calibrated so the marginal quality is 68%:
  // base = 0.68 - slope * mean C-Density under the per-cell oracle clustering
  const double slope = 0.6;
  double mean_cd = 0.0;
  for (std::uint64_t seed : config.seeds) {
    const auto cd = oracle_cdensity_of(graph, derive_seed(seed, "annotate"));
    mean_cd += std::accumulate(cd.begin(), cd.end(), 0.0) / static_cast<double>(cd.size());
  }
  mean_cd /= static_cast<double>(config.seeds.size());
  config.backend.sim.base_accuracy = 0.68 - slope * mean_cd;
  config.backend.sim.density_slope = slope;
  config.backend.sim.transition = "successor";
  config.backend.sim.transition_dominant_mass = 0.7;

  std::vector<double> random_accs, ps_accs;
  double random_quality = 0.0;
  for (std::uint64_t seed : config.seeds) {
    const auto cell = pipeline::run_cell(graph, config, seed);
    random_accs.push_back(cell.test_accuracy);
    random_quality += cell.quality.quality;
  }

  auto ps_config = config;
  ps_config.selection.method = SelectionMethod::featprop;
  ps_config.filter.enabled = true;
  ps_config.train.loss = gcn::LossKind::weighted_ce;
  for (std::uint64_t seed : ps_config.seeds) {
    const auto cell = pipeline::run_cell(graph, ps_config, seed);
    ps_accs.push_back(cell.test_accuracy);
  }

  const double random_mean = mean(random_accs);
  const double ps_mean = mean(ps_accs);
  detail = fmt("Random %.2f%% (need 62-78, quality %.1f%%), PS-FeatProp-W %.2f%% (need > Random)",
               100.0 * random_mean, 100.0 * random_quality / 3.0, 100.0 * ps_mean);
  return (ps_mean > random_mean && random_mean >= 0.62 && random_mean <= 0.78) ? PASS : FAIL;
}

// --------------------------------------------------------------------------
// 8. Budget-sweep trend
// --------------------------------------------------------------------------

Status budget_trend(std::string& detail) {
  const fs::path bundle_dir = scratch_root() / "pubmed_like_bundle";
  save_graph_bundle(make_synthetic_tag(pubmed_like_config(11)), bundle_dir.string());
  const auto graph = load_graph_bundle(bundle_dir.string());

  pipeline::PipelineConfig config;
  config.bundle = bundle_dir.string();
  config.seeds = {1, 2, 3};
  config.prompt.kind = PromptKind::vanilla_zero_shot;
  config.backend.sim.base_accuracy = 0.88;  // strong annotator, medical-abstract regime
  config.train.loss = gcn::LossKind::weighted_ce;

  const auto c = static_cast<std::uint32_t>(graph.class_count());
  const std::vector<std::uint32_t> budgets{5 * c, 10 * c, 20 * c, 40 * c, 80 * c};
  const auto reports = pipeline::budget_sweep(graph, config, budgets);

  std::vector<double> xs, ys;
  std::string curve;
  for (const auto& r : reports) {
    xs.push_back(static_cast<double>(r.budget));
    ys.push_back(r.test_accuracy_mean);
    curve += fmt(" %u:%.1f%%", r.budget, 100.0 * r.test_accuracy_mean);
  }
  const double rho = spearman(xs, ys);
  detail = fmt("Spearman(budget, accuracy) = %.3f (need > 0);%s", rho, curve.c_str());
  return rho > 0.0 ? PASS : FAIL;
}

// --------------------------------------------------------------------------
// 9. Optional live spot-check
// --------------------------------------------------------------------------

Status live_spot_check(std::string& detail) {
  const char* key = std::getenv("ANNOGRAPH_API_KEY");
  const char* bundle = std::getenv("ANNOGRAPH_CORA_BUNDLE");
  if (key == nullptr || *key == '\0' || bundle == nullptr || *bundle == '\0') {
    detail = "set ANNOGRAPH_API_KEY and ANNOGRAPH_CORA_BUNDLE to run the live check";
    return SKIP;
  }
  const auto graph = load_graph_bundle(bundle);
  if (!graph.has_gold()) {
    detail = "bundle has no gold labels";
    return FAIL;
  }
  LiveBackendConfig live;
  if (const char* endpoint = std::getenv("ANNOGRAPH_ENDPOINT")) live.endpoint = endpoint;
  auto backend = make_live_backend(live);

  const auto nodes = select_random(graph.node_count, 100, 20240517);
  AnnotateOptions options;
  options.strategy.kind = PromptKind::hybrid;
  options.max_dollars = 0.50;  // hard stop well above the expected spend
  const auto result = annotate_batch(*backend, graph, nodes, options);

  const auto quality = annotation_quality(result.annotations, graph.gold_labels);
  const double reported_dollars =
      static_cast<double>(result.cost.reported_prompt_tokens) / 1000.0 *
          options.prices.prompt_per_1k +
      static_cast<double>(result.cost.reported_completion_tokens) / 1000.0 *
          options.prices.completion_per_1k;
  const double ratio =
      reported_dollars > 0.0 ? result.cost.dollars_estimate / reported_dollars : 1.0;
  detail = fmt("agreement %.1f%% (need 60-78), estimate $%.4f (need < 0.10), estimate/reported "
               "= %.2f (need in [0.5, 2])",
               100.0 * quality.quality, result.cost.dollars_estimate, ratio);
  const bool ok = quality.quality >= 0.60 && quality.quality <= 0.78 &&
                  result.cost.dollars_estimate < 0.10 && ratio >= 0.5 && ratio <= 2.0;
  return ok ? PASS : FAIL;
}

// --------------------------------------------------------------------------
// 10. Determinism of the composed pipeline
// --------------------------------------------------------------------------

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Status determinism(std::string& detail) {
  const fs::path bundle_dir = scratch_root() / "determinism_bundle";
  SyntheticTagConfig cfg;
  cfg.nodes = 300;
  cfg.classes = 4;
  cfg.feature_dim = 8;
  cfg.edges = 700;
  cfg.seed = 3;
  save_graph_bundle(make_synthetic_tag(cfg), bundle_dir.string());

  pipeline::PipelineConfig config;
  config.bundle = bundle_dir.string();
  config.seeds = {5};
  config.selection.budget = 60;
  config.selection.method = SelectionMethod::featprop;
  config.filter.enabled = true;
  config.train.epochs = 10;
  config.train.hidden_dim = 16;

  // run the composed command with its progress lines diverted
  const int saved_stdout = ::dup(1);
  std::fflush(stdout);
  FILE* sink = std::freopen("/dev/null", "w", stdout);
  config.out = (scratch_root() / "det_run_a").string();
  pipeline::cmd_pipeline(config);
  config.out = (scratch_root() / "det_run_b").string();
  pipeline::cmd_pipeline(config);
  std::fflush(stdout);
  ::dup2(saved_stdout, 1);
  ::close(saved_stdout);
  (void)sink;

  const auto a = slurp(scratch_root() / "det_run_a" / "report.json");
  const auto b = slurp(scratch_root() / "det_run_b" / "report.json");
  detail = fmt("report.json: %zu bytes, byte-identical = %s", a.size(),
               (a == b && !a.empty()) ? "yes" : "NO");
  return (!a.empty() && a == b) ? PASS : FAIL;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Check> checks = {
      {1, "COE incremental/recomputed equivalence", coe_equivalence},
      {2, "PageRank sparse vs dense oracle", pagerank_oracle},
      {3, "GCN analytic gradients vs finite differences", gcn_gradient_check},
      {4, "FeatProp medoid objective near exhaustive optimum", featprop_medoid_oracle},
      {5, "difficulty-aware selection quality lift and decile shape",
       selection_quality_directional},
      {6, "post-filter quality lift with preserved diversity", post_filter_lift},
      {7, "end-to-end strategy ordering at citation scale", table_ordering},
      {8, "budget sweep accuracy trend", budget_trend},
      {9, "live annotation spot-check (optional)", live_spot_check},
      {10, "pipeline determinism, byte-identical reports", determinism},
  };

  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (auto& check : checks) {
    if (!wanted.empty() && wanted.count(check.number) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    Status status = FAIL;
    try {
      status = check.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = status == PASS ? "PASS" : (status == SKIP ? "SKIP" : "FAIL");
    std::printf("[%s] criterion %2d: %s (%.1fs) - %s\n", tag, check.number, check.name.c_str(),
                seconds, detail.c_str());
    std::fflush(stdout);
    if (status == FAIL) ++failures;
  }
  fs::remove_all(scratch_root());
  return failures;
}
