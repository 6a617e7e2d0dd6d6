#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "annograph/errors.hpp"
#include "annograph/pipeline.hpp"

namespace {

struct CliState {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value, applied in order
  std::string backend_alias;
  bool allow_spend = false;
  double max_dollars = -1.0;
  std::string seeds_csv;
};

// Every scalar config field is reachable as --<dotted.name> <value>; the
// handful of flags named below are aliases kept for convenience.
void add_common_options(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "JSON config file");
  cmd->add_option("--set", state.overrides, "explicit key=value override")->take_all();
  for (const auto& [key, type] : annograph::pipeline::config_flag_table()) {
    const std::string flag = "--" + key;
    cmd->add_option_function<std::string>(
           flag,
           [&state, key = key](const std::string& value) {
             state.overrides.push_back(key + "=" + value);
           },
           "config field " + key + " (" + type + ")")
        ->type_name(type == "bool" ? "BOOL" : (type == "number" ? "NUM" : "TEXT"));
  }
  cmd->add_option("--seeds", state.seeds_csv, "comma-separated run-cell seeds");
  cmd->add_option_function<std::string>(
      "--backend",
      [&state](const std::string& value) {
        state.overrides.push_back(std::string("backend.mode=") +
                                  (value == "live" ? "live" : "sim"));
      },
      "annotation backend: sim or live");
  cmd->add_flag("--allow-spend", state.allow_spend, "permit live-API spending");
  cmd->add_option("--max-dollars", state.max_dollars, "abort annotation past this estimate");
}

annograph::pipeline::PipelineConfig resolve_config(CliState& state) {
  if (!state.seeds_csv.empty()) state.overrides.push_back("seeds=" + state.seeds_csv);
  if (state.allow_spend) state.overrides.push_back("spend.allow=true");
  if (state.max_dollars >= 0.0)
    state.overrides.push_back("spend.max_dollars=" + std::to_string(state.max_dollars));
  return annograph::pipeline::load_pipeline_config(state.config_path, state.overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-free node classification on text-attributed graphs: active selection, "
               "noisy annotation, post-filtering, GCN training"};
  app.require_subcommand(1);

  CliState state;
  std::vector<std::uint32_t> budgets;
  std::string synth_preset = "blobs";
  std::uint64_t synth_seed = 0;

  auto* ingest = app.add_subcommand("ingest", "validate a graph bundle and report stats");
  auto* select = app.add_subcommand("select", "run active node selection");
  auto* annotate = app.add_subcommand("annotate", "annotate the selected nodes");
  auto* filter = app.add_subcommand("filter", "post-filter annotated nodes");
  auto* train = app.add_subcommand("train", "train the GCN on surviving annotations");
  auto* evaluate = app.add_subcommand("evaluate", "predict and score against gold labels");
  auto* pipe = app.add_subcommand("pipeline", "run the full pipeline over all seeds");
  auto* sweep = app.add_subcommand("sweep", "run the pipeline across budgets");
  auto* synth = app.add_subcommand("synth", "write a synthetic bundle for experiments");

  for (auto* cmd : {ingest, select, annotate, filter, train, evaluate, pipe, sweep, synth})
    add_common_options(cmd, state);
  sweep->add_option("--budgets", budgets, "budgets to sweep")->delimiter(',')->required();
  synth->add_option("--preset", synth_preset, "cora-like | pubmed-like | blobs");
  synth->add_option("--gen-seed", synth_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve_config(state);
    using namespace annograph::pipeline;
    if (app.got_subcommand(ingest)) return cmd_ingest(config);
    if (app.got_subcommand(select)) return cmd_select(config);
    if (app.got_subcommand(annotate)) return cmd_annotate(config);
    if (app.got_subcommand(filter)) return cmd_filter(config);
    if (app.got_subcommand(train)) return cmd_train(config);
    if (app.got_subcommand(evaluate)) return cmd_evaluate(config);
    if (app.got_subcommand(pipe)) return cmd_pipeline(config);
    if (app.got_subcommand(sweep)) return cmd_sweep(config, budgets);
    if (app.got_subcommand(synth)) return cmd_synth(config, synth_preset, synth_seed);
    return 2;
  } catch (const annograph::BudgetCapExceeded& e) {
    std::fprintf(stderr, "budget cap: %s\n", e.what());
    return 4;
  } catch (const annograph::BackendError& e) {
    std::fprintf(stderr, "backend error: %s\n", e.what());
    return 3;
  } catch (const annograph::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
