#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "annograph/annotator.hpp"
#include "annograph/eval.hpp"
#include "annograph/filtering.hpp"
#include "annograph/gcn.hpp"
#include "annograph/selection.hpp"

namespace annograph::pipeline {

enum class BackendMode { simulated, live };

struct SimOracleConfig {
  double base_accuracy = 0.7;
  double density_slope = 0.0;
  double confidence_calibration = 1.0;
  std::string transition = "uniform";  // uniform | successor
  double transition_dominant_mass = 0.7;
};

struct BackendSection {
  BackendMode mode = BackendMode::simulated;
  SimOracleConfig sim;
  LiveBackendConfig live;
  PriceTable prices;
  int max_retries = 3;
  int concurrency = 1;
  bool log_transcript = false;  // append prompts/responses to <out>/transcript.log
};

struct FilterSection {
  bool enabled = false;
  double beta0 = 1.0;
  double beta1 = 1.0;
  double beta2 = 1.0;
  std::uint32_t target_size = 0;  // 0 = ceil(0.75 * surviving selection)
  CoeOrientation orientation = CoeOrientation::protect_small;
};

struct SpendSection {
  bool allow = false;
  double max_dollars = 0.0;
};

struct PipelineConfig {
  std::string bundle;
  std::string out = "out";
  std::uint64_t seed = 1;              // root seed for staged commands
  std::vector<std::uint64_t> seeds = {1, 2, 3};  // run-cell roots for reports/sweeps
  SelectionConfig selection;
  PromptStrategy prompt;
  FilterSection filter;
  gcn::TrainConfig train;
  BackendSection backend;
  SpendSection spend;
};

// Defaults merged with the JSON file (when given) and dotted-key overrides
// such as "selection.method=featprop". Throws ConfigError on unknown keys or
// malformed values.
PipelineConfig load_pipeline_config(const std::string& path_or_empty,
                                    const std::vector<std::string>& dotted_overrides);

std::string config_to_json(const PipelineConfig& config);

// FNV-1a hash of the canonical config JSON with the output directory blanked,
// printed as 16 hex digits. Stamped on every artifact.
std::string config_hash(const PipelineConfig& config);

// All scalar config fields as dotted keys (for CLI flag registration).
std::vector<std::pair<std::string, std::string>> config_flag_table();

// Strategy tag in the [DA-][PS-]<Method>[-W] naming scheme.
std::string strategy_tag(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// In-memory pipeline
// ---------------------------------------------------------------------------

struct CellResult {
  std::uint64_t root_seed = 0;
  std::vector<std::uint32_t> selected;
  std::vector<Annotation> annotations;     // aligned with selected
  std::vector<std::uint32_t> survivors;    // post-filter (or non-abstain) train set
  std::vector<FilterRemoval> removals;
  gcn::GcnParams params;
  gcn::TrainHistory history;
  std::vector<int> predictions;
  std::vector<double> pipeline_cdensity;   // selection-stage C-Density, all nodes
  double test_accuracy = 0.0;
  AnnotationQuality quality;
  CostReport cost;
};

// One full select -> annotate -> filter -> train -> evaluate pass, every stage
// seeded from root_seed. The optional cache makes annotation idempotent.
CellResult run_cell(const TextAttributedGraph& graph, const PipelineConfig& config,
                    std::uint64_t root_seed, AnnotationCache* cache = nullptr);

ExperimentReport aggregate_cells(const PipelineConfig& config,
                                 const std::vector<CellResult>& cells);

// Test split used by evaluation: gold-labeled nodes outside the pre-filter
// selected set.
std::vector<std::uint8_t> test_mask(const TextAttributedGraph& graph,
                                    const std::vector<std::uint32_t>& selected);

// ---------------------------------------------------------------------------
// Staged commands (the CLI surface). Each validates before writing anything
// and refuses an output directory produced under a different config hash.
// ---------------------------------------------------------------------------

int cmd_ingest(const PipelineConfig& config);
int cmd_select(const PipelineConfig& config);
int cmd_annotate(const PipelineConfig& config);
int cmd_filter(const PipelineConfig& config);
int cmd_train(const PipelineConfig& config);
int cmd_evaluate(const PipelineConfig& config);
int cmd_pipeline(const PipelineConfig& config);
int cmd_sweep(const PipelineConfig& config, const std::vector<std::uint32_t>& budgets);
int cmd_synth(const PipelineConfig& config, const std::string& preset, std::uint64_t seed);

// cmd_sweep backing: one report per budget, each over config.seeds.
std::vector<ExperimentReport> budget_sweep(const TextAttributedGraph& graph,
                                           const PipelineConfig& config,
                                           const std::vector<std::uint32_t>& budgets);

}  // namespace annograph::pipeline
