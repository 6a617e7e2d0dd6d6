#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "annograph/annotator.hpp"
#include "annograph/matrix.hpp"

namespace annograph {

// Exact-match fraction over the masked nodes (1 = include).
double accuracy(const std::vector<int>& predictions, const std::vector<int>& gold,
                const std::vector<std::uint8_t>& mask);

struct AnnotationQuality {
  double quality = 0.0;       // match fraction over non-abstained annotations
  std::size_t matched = 0;
  std::size_t considered = 0;
  std::size_t abstained = 0;
};

AnnotationQuality annotation_quality(const std::vector<Annotation>& annotations,
                                     const std::vector<int>& gold);

// Row-normalized confusion of gold class -> annotated class. Rows without
// support stay zero.
struct NoiseTransitionMatrix {
  Matrix probabilities;              // C x C
  std::vector<std::size_t> support;  // gold-class counts
};

NoiseTransitionMatrix noise_transition(const std::vector<Annotation>& annotations,
                                       const std::vector<int>& gold, std::size_t class_count);

// Flip exactly round((1 - quality) * N) labels, each to a uniformly random
// different class.
std::vector<int> inject_synthetic_noise(const std::vector<int>& gold, double quality,
                                        std::size_t class_count, std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double annotation_quality = 0.0;
  std::size_t train_size = 0;
  std::size_t abstained = 0;
};

struct ExperimentReport {
  std::string strategy;
  std::uint32_t budget = 0;
  double annotation_quality_mean = 0.0;
  double test_accuracy_mean = 0.0;
  double test_accuracy_std = 0.0;  // population std over seeds
  CostReport cost;
  std::vector<SeedOutcome> per_seed;
};

double mean(const std::vector<double>& xs);
double population_std(const std::vector<double>& xs);

// "76.23 ± 0.07"-style percent formatting.
std::string format_mean_std(double mean_fraction, double std_fraction);

// Spearman rank correlation; ties get mean ranks.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Simple (x, y) series for the emitted plot-data CSV files.
struct PlotSeries {
  std::string name;  // file stem under plotdata/
  std::string x_label;
  std::string y_label;
  std::vector<std::pair<double, double>> points;
};

// Mean annotation accuracy per decile of distance to the nearest cluster
// center (decile 0 = closest).
PlotSeries density_decile_series(const std::vector<Annotation>& annotations,
                                 const std::vector<int>& gold,
                                 const std::vector<double>& center_distance);

// Mean accuracy per 10-point confidence bin; bins without support are skipped.
PlotSeries confidence_bin_series(const std::vector<Annotation>& annotations,
                                 const std::vector<int>& gold);

// report.csv + report.json (+ plotdata/*.csv) under out_dir, each carrying the
// config hash. The JSON round-trips through load_reports.
void emit_report(const std::vector<ExperimentReport>& reports,
                 const std::vector<PlotSeries>& plots, const std::string& out_dir,
                 const std::string& config_hash);

std::vector<ExperimentReport> load_reports(const std::string& json_path);

}  // namespace annograph
