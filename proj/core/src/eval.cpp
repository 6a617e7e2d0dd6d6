#include "annograph/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "annograph/errors.hpp"
#include "annograph/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace annograph {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& gold,
                const std::vector<std::uint8_t>& mask) {
  if (predictions.size() != gold.size() || predictions.size() != mask.size())
    throw ConfigError("accuracy: size mismatch");
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    if (predictions[i] == gold[i]) ++hit;
  }
  if (total == 0) throw ConfigError("accuracy: empty mask");
  return static_cast<double>(hit) / static_cast<double>(total);
}

AnnotationQuality annotation_quality(const std::vector<Annotation>& annotations,
                                     const std::vector<int>& gold) {
  AnnotationQuality q;
  for (const auto& a : annotations) {
    if (a.label_index == kAbstain) {
      ++q.abstained;
      continue;
    }
    ++q.considered;
    if (a.node_id < gold.size() && a.label_index == gold[a.node_id]) ++q.matched;
  }
  q.quality = q.considered == 0 ? 0.0
                                : static_cast<double>(q.matched) / static_cast<double>(q.considered);
  return q;
}

NoiseTransitionMatrix noise_transition(const std::vector<Annotation>& annotations,
                                       const std::vector<int>& gold, std::size_t class_count) {
  NoiseTransitionMatrix t;
  t.probabilities = Matrix(class_count, class_count, 0.0);
  t.support.assign(class_count, 0);
  for (const auto& a : annotations) {
    if (a.label_index == kAbstain) continue;
    const int g = gold.at(a.node_id);
    if (g < 0) continue;
    ++t.support[static_cast<std::size_t>(g)];
    t.probabilities(static_cast<std::size_t>(g), static_cast<std::size_t>(a.label_index)) += 1.0;
  }
  for (std::size_t i = 0; i < class_count; ++i) {
    if (t.support[i] == 0) continue;
    for (std::size_t j = 0; j < class_count; ++j)
      t.probabilities(i, j) /= static_cast<double>(t.support[i]);
  }
  return t;
}

std::vector<int> inject_synthetic_noise(const std::vector<int>& gold, double quality,
                                        std::size_t class_count, std::uint64_t seed) {
  if (quality < 0.0 || quality > 1.0) throw ConfigError("inject_synthetic_noise: quality in (0,1]");
  std::vector<int> noisy = gold;
  const auto flips = static_cast<std::size_t>(
      std::llround((1.0 - quality) * static_cast<double>(gold.size())));
  Rng rng(seed);
  const auto victims = rng.sample_without_replacement(gold.size(), flips);
  for (std::uint32_t v : victims) {
    const int old = gold[v];
    // uniform over the other C-1 classes
    int pick = static_cast<int>(rng.next_below(class_count - 1));
    if (pick >= old) ++pick;
    noisy[v] = pick;
  }
  return noisy;
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double population_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

std::string format_mean_std(double mean_fraction, double std_fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", 100.0 * mean_fraction, 100.0 * std_fraction);
  return buf;
}

namespace {

std::vector<double> mean_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = static_cast<double>(i + j) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw ConfigError("spearman: need >= 2 pairs");
  const auto rx = mean_ranks(xs);
  const auto ry = mean_ranks(ys);
  const double mx = mean(rx), my = mean(ry);
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

PlotSeries density_decile_series(const std::vector<Annotation>& annotations,
                                 const std::vector<int>& gold,
                                 const std::vector<double>& center_distance) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < annotations.size(); ++i)
    if (annotations[i].label_index != kAbstain) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return center_distance[annotations[a].node_id] < center_distance[annotations[b].node_id];
  });

  PlotSeries series{"density_deciles", "decile", "accuracy", {}};
  const std::size_t n = order.size();
  if (n == 0) return series;
  for (std::size_t d = 0; d < 10; ++d) {
    const std::size_t lo = d * n / 10;
    const std::size_t hi = (d + 1) * n / 10;
    if (hi <= lo) continue;
    std::size_t hit = 0;
    for (std::size_t k = lo; k < hi; ++k) {
      const auto& a = annotations[order[k]];
      if (a.label_index == gold[a.node_id]) ++hit;
    }
    series.points.emplace_back(static_cast<double>(d),
                               static_cast<double>(hit) / static_cast<double>(hi - lo));
  }
  return series;
}

PlotSeries confidence_bin_series(const std::vector<Annotation>& annotations,
                                 const std::vector<int>& gold) {
  PlotSeries series{"confidence_bins", "confidence_bin_center", "accuracy", {}};
  for (int b = 0; b < 10; ++b) {
    const double lo = 10.0 * b;
    const double hi = 10.0 * (b + 1);
    std::size_t hit = 0, total = 0;
    for (const auto& a : annotations) {
      if (a.label_index == kAbstain) continue;
      const bool in_bin = b == 9 ? (a.confidence >= lo && a.confidence <= hi)
                                 : (a.confidence >= lo && a.confidence < hi);
      if (!in_bin) continue;
      ++total;
      if (a.label_index == gold[a.node_id]) ++hit;
    }
    if (total > 0)
      series.points.emplace_back(lo + 5.0, static_cast<double>(hit) / static_cast<double>(total));
  }
  return series;
}

namespace {

json report_to_json(const ExperimentReport& r) {
  json j;
  j["strategy"] = r.strategy;
  j["budget"] = r.budget;
  j["annotation_quality_mean"] = r.annotation_quality_mean;
  j["test_accuracy_mean"] = r.test_accuracy_mean;
  j["test_accuracy_std"] = r.test_accuracy_std;
  j["cost"] = {{"prompt_tokens_estimate", r.cost.prompt_tokens_estimate},
               {"completion_tokens_estimate", r.cost.completion_tokens_estimate},
               {"reported_prompt_tokens", r.cost.reported_prompt_tokens},
               {"reported_completion_tokens", r.cost.reported_completion_tokens},
               {"dollars_estimate", r.cost.dollars_estimate},
               {"requests", r.cost.requests},
               {"retries", r.cost.retries}};
  j["per_seed"] = json::array();
  for (const auto& s : r.per_seed)
    j["per_seed"].push_back({{"seed", s.seed},
                             {"test_accuracy", s.test_accuracy},
                             {"annotation_quality", s.annotation_quality},
                             {"train_size", s.train_size},
                             {"abstained", s.abstained}});
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.strategy = j.at("strategy").get<std::string>();
  r.budget = j.at("budget").get<std::uint32_t>();
  r.annotation_quality_mean = j.at("annotation_quality_mean").get<double>();
  r.test_accuracy_mean = j.at("test_accuracy_mean").get<double>();
  r.test_accuracy_std = j.at("test_accuracy_std").get<double>();
  const auto& c = j.at("cost");
  r.cost.prompt_tokens_estimate = c.at("prompt_tokens_estimate").get<std::uint64_t>();
  r.cost.completion_tokens_estimate = c.at("completion_tokens_estimate").get<std::uint64_t>();
  r.cost.reported_prompt_tokens = c.at("reported_prompt_tokens").get<std::uint64_t>();
  r.cost.reported_completion_tokens = c.at("reported_completion_tokens").get<std::uint64_t>();
  r.cost.dollars_estimate = c.at("dollars_estimate").get<double>();
  r.cost.requests = c.at("requests").get<std::uint64_t>();
  r.cost.retries = c.at("retries").get<std::uint64_t>();
  for (const auto& s : j.at("per_seed")) {
    SeedOutcome o;
    o.seed = s.at("seed").get<std::uint64_t>();
    o.test_accuracy = s.at("test_accuracy").get<double>();
    o.annotation_quality = s.at("annotation_quality").get<double>();
    o.train_size = s.at("train_size").get<std::size_t>();
    o.abstained = s.at("abstained").get<std::size_t>();
    r.per_seed.push_back(o);
  }
  return r;
}

}  // namespace

void emit_report(const std::vector<ExperimentReport>& reports,
                 const std::vector<PlotSeries>& plots, const std::string& out_dir,
                 const std::string& config_hash) {
  fs::create_directories(out_dir);

  {
    std::ofstream csv(fs::path(out_dir) / "report.csv");
    if (!csv) throw ConfigError("cannot write report.csv under " + out_dir);
    csv << "# config_hash=" << config_hash << '\n';
    csv << "strategy,budget,annotation_quality,test_accuracy,requests,dollars_estimate\n";
    char buf[64];
    for (const auto& r : reports) {
      std::snprintf(buf, sizeof buf, "%.4f", r.annotation_quality_mean);
      csv << r.strategy << ',' << r.budget << ',' << buf << ','
          << format_mean_std(r.test_accuracy_mean, r.test_accuracy_std) << ',' << r.cost.requests
          << ',';
      std::snprintf(buf, sizeof buf, "%.6f", r.cost.dollars_estimate);
      csv << buf << '\n';
    }
  }
  {
    json root;
    root["config_hash"] = config_hash;
    root["reports"] = json::array();
    for (const auto& r : reports) root["reports"].push_back(report_to_json(r));
    std::ofstream out(fs::path(out_dir) / "report.json");
    if (!out) throw ConfigError("cannot write report.json under " + out_dir);
    out << root.dump(2) << '\n';
  }
  if (!plots.empty()) {
    fs::create_directories(fs::path(out_dir) / "plotdata");
    for (const auto& p : plots) {
      std::ofstream out(fs::path(out_dir) / "plotdata" / (p.name + ".csv"));
      if (!out) throw ConfigError("cannot write plotdata/" + p.name + ".csv");
      out << "# config_hash=" << config_hash << '\n';
      out << p.x_label << ',' << p.y_label << '\n';
      char buf[80];
      for (const auto& [x, y] : p.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", x, y);
        out << buf << '\n';
      }
    }
  }
}

std::vector<ExperimentReport> load_reports(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw ConfigError("cannot read " + json_path);
  json root;
  in >> root;
  std::vector<ExperimentReport> reports;
  for (const auto& j : root.at("reports")) reports.push_back(report_from_json(j));
  return reports;
}

}  // namespace annograph
