#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "annograph/graph.hpp"
#include "annograph/matrix.hpp"

namespace annograph {

// Label value for an annotation that failed after retry exhaustion. Abstained
// nodes are dropped before filtering and training.
inline constexpr int kAbstain = -1;

enum class PromptKind { vanilla_zero_shot, topk, most_voting, hybrid };

std::string to_string(PromptKind kind);
PromptKind prompt_kind_from_string(const std::string& name);

struct PromptStrategy {
  PromptKind kind = PromptKind::hybrid;
  int top_k = 3;
  int num_queries = 3;  // m, for most_voting / hybrid
  double temperature_primary = 0.0;
  double temperature_correction = 1.0;
  int prompt_char_budget = 6000;  // whole-prompt cap; node text is truncated to fit
};

struct Annotation {
  std::uint32_t node_id = 0;
  int label_index = kAbstain;
  double confidence = 0.0;  // in [0, 100]; 0 when abstained
  std::vector<std::string> raw_responses;
  std::string strategy;
  int attempts = 0;
  bool is_simulated = false;
};

// ---------------------------------------------------------------------------
// Prompt construction and response parsing
// ---------------------------------------------------------------------------

std::string build_prompt(const PromptStrategy& strategy, const std::string& node_text,
                         const std::vector<std::string>& class_names);

struct ParsedGuess {
  int label_index = 0;
  double confidence = 0.0;  // clamped to [0, 100]
};

enum class ParseFailureKind { no_json, invalid_label, empty };

struct ParseOutcome {
  bool ok = false;
  std::vector<ParsedGuess> guesses;  // valid guesses, response order
  ParseFailureKind failure = ParseFailureKind::no_json;
  std::string invalid_answer;  // first rejected answer, for the correction prompt
};

// Extracts the first JSON-array span of the raw output and matches answers to
// class names case-insensitively after whitespace/punctuation normalization.
ParseOutcome parse_response(const std::string& raw, const std::vector<std::string>& class_names);

std::string build_self_correction_prompt(const std::string& previous_prompt,
                                         const std::string& previous_output,
                                         const ParseOutcome& failure,
                                         const std::vector<std::string>& class_names);

// Label names are compared through this normalization (lowercase, punctuation
// stripped, whitespace collapsed).
std::string normalize_label(const std::string& s);

// Consistency aggregation over m parsed responses: the winner is the majority
// top-1 answer (ties: highest summed confidence, then lowest class index);
// its confidence is the mean of its reported confidence per response, with 0
// where it does not appear.
std::pair<int, double> aggregate_hybrid(const std::vector<std::vector<ParsedGuess>>& responses);

// ---------------------------------------------------------------------------
// Cost metering
// ---------------------------------------------------------------------------

struct PriceTable {
  double prompt_per_1k = 0.0015;
  double completion_per_1k = 0.002;
};

struct CostReport {
  std::uint64_t prompt_tokens_estimate = 0;
  std::uint64_t completion_tokens_estimate = 0;
  std::uint64_t reported_prompt_tokens = 0;      // provider usage, live runs only
  std::uint64_t reported_completion_tokens = 0;
  double dollars_estimate = 0.0;
  std::uint64_t requests = 0;
  std::uint64_t retries = 0;
};

// Token count heuristic: ceil(characters / 4).
std::uint64_t estimate_tokens(const std::string& text);

CostReport estimate_cost(const std::vector<std::string>& prompts,
                         const std::vector<std::string>& completions, const PriceTable& prices);

// ---------------------------------------------------------------------------
// Simulated oracle
// ---------------------------------------------------------------------------

// Noisy oracle over gold labels: a node is annotated correctly with
// probability clamp(base_accuracy + density_slope * cdensity, 0, 1); wrong
// answers follow the transition row of the gold class. With
// confidence_calibration = 1 confidence equals 100 * p(correct), so accuracy
// within any confidence bin matches the bin's mean confidence.
struct OracleNoiseModel {
  double base_accuracy = 0.7;
  double density_slope = 0.0;
  Matrix transition;  // C x C row-stochastic, zero diagonal; empty = uniform off-diagonal
  double confidence_calibration = 1.0;
  std::uint64_t seed = 0;
};

Matrix uniform_off_diagonal_transition(std::size_t classes);

// Asymmetric wrong-class structure: each class flips into its successor class
// with probability `dominant_mass`, the rest spread uniformly.
Matrix successor_biased_transition(std::size_t classes, double dominant_mass);

// One deterministic draw for (model.seed, node_id). Requires gold labels.
Annotation simulated_annotate(const TextAttributedGraph& graph, const OracleNoiseModel& model,
                              const std::vector<double>& cdensity, std::uint32_t node_id);

// ---------------------------------------------------------------------------
// Backends and batch annotation
// ---------------------------------------------------------------------------

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  struct Completion {
    std::string content;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    bool reported_usage = false;
  };

  // guesses_wanted tells the simulated backend how many ranked answers the
  // prompt asked for; live backends ignore it.
  virtual Completion complete(std::uint32_t node_id, int query_index, const std::string& prompt,
                              double temperature, int guesses_wanted) = 0;
  virtual bool is_simulated() const = 0;
};

std::unique_ptr<ChatBackend> make_simulated_backend(const TextAttributedGraph& graph,
                                                    OracleNoiseModel model,
                                                    std::vector<double> cdensity);

struct LiveBackendConfig {
  std::string endpoint = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "ANNOGRAPH_API_KEY";
  double timeout_seconds = 30.0;
  int transport_retries = 3;
  int backoff_base_ms = 250;
};

// Speaks the chat-completion HTTP shape: POST {model, temperature, messages}
// with a Bearer key read from the configured environment variable. Transient
// failures (transport, 429, 5xx) retry with exponential backoff.
std::unique_ptr<ChatBackend> make_live_backend(const LiveBackendConfig& config);

// Append-only JSONL cache of annotations keyed by (node_id, strategy kind).
class AnnotationCache {
 public:
  explicit AnnotationCache(std::string path);

  std::optional<Annotation> lookup(std::uint32_t node_id, const std::string& strategy) const;
  void append(const Annotation& annotation);
  std::size_t size() const { return entries_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::map<std::pair<std::uint32_t, std::string>, Annotation> entries_;
};

struct AnnotateOptions {
  PromptStrategy strategy;
  int max_retries = 3;    // self-correction rounds per query
  int concurrency = 1;    // in-flight backend requests
  double max_dollars = 0.0;  // live runs: abort mid-batch past this estimate (0 = uncapped)
  PriceTable prices;
  std::string transcript_path;  // optional prompt/response audit log
};

struct AnnotateResult {
  std::vector<Annotation> annotations;  // one per requested node, input order
  CostReport cost;
  std::size_t cache_hits = 0;
};

// One annotation per node. Malformed outputs retry through self-correction up
// to max_retries, then the node abstains; transport exhaustion also abstains
// rather than failing the batch. New annotations are appended to the cache
// before returning.
AnnotateResult annotate_batch(ChatBackend& backend, const TextAttributedGraph& graph,
                              const std::vector<std::uint32_t>& node_ids,
                              const AnnotateOptions& options, AnnotationCache* cache = nullptr);

}  // namespace annograph
