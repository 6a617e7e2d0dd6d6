#include "annograph/annotator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#ifdef ANNOGRAPH_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "annograph/errors.hpp"
#include "annograph/rng.hpp"

using json = nlohmann::json;

namespace annograph {

std::string to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::vanilla_zero_shot: return "vanilla_zero_shot";
    case PromptKind::topk: return "topk";
    case PromptKind::most_voting: return "most_voting";
    case PromptKind::hybrid: return "hybrid";
  }
  return "unknown";
}

PromptKind prompt_kind_from_string(const std::string& name) {
  if (name == "vanilla_zero_shot" || name == "vanilla") return PromptKind::vanilla_zero_shot;
  if (name == "topk") return PromptKind::topk;
  if (name == "most_voting") return PromptKind::most_voting;
  if (name == "hybrid") return PromptKind::hybrid;
  throw ConfigError("unknown prompt kind '" + name + "'");
}

namespace {

bool wants_topk(PromptKind kind) {
  return kind == PromptKind::topk || kind == PromptKind::hybrid;
}

int queries_per_node(const PromptStrategy& s) {
  return (s.kind == PromptKind::most_voting || s.kind == PromptKind::hybrid) ? s.num_queries : 1;
}

std::string render_class_list(const std::vector<std::string>& class_names) {
  std::string out = "[";
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    std::string lowered = class_names[i];
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (i) out += ", ";
    out += lowered;
  }
  out += "]";
  return out;
}

}  // namespace

std::string build_prompt(const PromptStrategy& strategy, const std::string& node_text,
                         const std::vector<std::string>& class_names) {
  if (class_names.empty()) throw ConfigError("build_prompt: empty class list");
  if (strategy.top_k <= 0 || strategy.top_k > static_cast<int>(class_names.size()))
    throw ConfigError("build_prompt: top_k must be in [1, class count]");

  std::string instruction;
  if (wants_topk(strategy.kind)) {
    instruction = "Provide your " + std::to_string(strategy.top_k) +
                  " best guesses and a confidence number that each is correct (0 to 100) for the "
                  "following question from most probable to least. The sum of all confidence "
                  "should be 100. For example, [ {\"answer\": <your_first_answer>, \"confidence\": "
                  "<confidence_for_first_answer>}, ... ]";
  } else {
    instruction = "Provide your best guess and a confidence number that it is correct (0 to 100). "
                  "For example, [ {\"answer\": <your_answer>, \"confidence\": "
                  "<confidence_for_answer>} ]";
  }

  const std::string head = "Question: ";
  const std::string tail = "\nTask:\nThere are following categories:\n" +
                           render_class_list(class_names) +
                           "\nWhat's the category of this text?\n" + instruction + "\nOutput:\n";

  std::string text = node_text;
  const std::size_t fixed = head.size() + tail.size();
  const std::size_t budget = static_cast<std::size_t>(std::max(strategy.prompt_char_budget, 0));
  if (fixed + text.size() > budget) {
    const std::size_t room = budget > fixed + 3 ? budget - fixed - 3 : 0;
    text = text.substr(0, room) + "...";
  }
  return head + text + tail;
}

std::string normalize_label(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(c));
    } else {
      pending_space = true;
    }
  }
  return out;
}

namespace {

// All parseable JSON array spans of the raw output, in order of appearance.
std::vector<json> extract_json_arrays(const std::string& raw) {
  std::vector<json> arrays;
  for (std::size_t start = raw.find('['); start != std::string::npos;
       start = raw.find('[', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '[') ++depth;
      else if (c == ']' && --depth == 0) {
        json parsed = json::parse(raw.substr(start, i - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_array()) arrays.push_back(std::move(parsed));
        break;
      }
    }
  }
  return arrays;
}

double clamp_confidence(double v) { return std::min(100.0, std::max(0.0, v)); }

}  // namespace

ParseOutcome parse_response(const std::string& raw, const std::vector<std::string>& class_names) {
  ParseOutcome outcome;

  const auto arrays = extract_json_arrays(raw);
  if (arrays.empty()) {
    outcome.failure = ParseFailureKind::no_json;
    return outcome;
  }

  std::map<std::string, int> index;
  for (std::size_t i = 0; i < class_names.size(); ++i)
    index[normalize_label(class_names[i])] = static_cast<int>(i);

  // first array that yields usable guesses wins; otherwise report the most
  // informative failure seen (invalid_label over empty)
  bool saw_empty = false;
  for (const auto& array : arrays) {
    if (array.empty()) {
      saw_empty = true;
      continue;
    }
    std::vector<ParsedGuess> guesses;
    std::string invalid;
    for (const auto& element : array) {
      std::string answer;
      double confidence = 0.0;
      if (element.is_object()) {
        if (!element.contains("answer")) {
          if (invalid.empty()) invalid = element.dump();
          continue;
        }
        answer = element["answer"].is_string() ? element["answer"].get<std::string>()
                                               : element["answer"].dump();
        if (element.contains("confidence")) {
          const auto& conf = element["confidence"];
          if (conf.is_number()) confidence = conf.get<double>();
          else if (conf.is_string()) {
            try {
              confidence = std::stod(conf.get<std::string>());
            } catch (...) {
              confidence = 0.0;
            }
          }
        }
      } else if (element.is_string()) {
        answer = element.get<std::string>();
      } else {
        if (invalid.empty()) invalid = element.dump();
        continue;
      }

      auto it = index.find(normalize_label(answer));
      if (it == index.end()) {
        if (invalid.empty()) invalid = answer;
        continue;
      }
      guesses.push_back({it->second, clamp_confidence(confidence)});
    }
    if (!guesses.empty()) {
      outcome.ok = true;
      outcome.guesses = std::move(guesses);
      outcome.invalid_answer.clear();
      return outcome;
    }
    if (outcome.invalid_answer.empty()) outcome.invalid_answer = invalid;
  }

  if (!outcome.invalid_answer.empty()) outcome.failure = ParseFailureKind::invalid_label;
  else if (saw_empty) outcome.failure = ParseFailureKind::empty;
  else outcome.failure = ParseFailureKind::no_json;
  return outcome;
}

std::string build_self_correction_prompt(const std::string& previous_prompt,
                                         const std::string& previous_output,
                                         const ParseOutcome& failure,
                                         const std::vector<std::string>& class_names) {
  std::string prompt = "Previous prompt: " + previous_prompt + "\n";
  prompt += "Your previous output doesn't follow the format, please correct it\n";
  prompt += "old output: " + previous_output + "\n";
  if (!failure.ok && failure.failure == ParseFailureKind::invalid_label)
    prompt += "Your previous answer " + failure.invalid_answer + " is not a valid class.\n";
  prompt += "Your should only output categories from the following list:\n";
  prompt += render_class_list(class_names) + "\n";
  prompt += "New output here:\n";
  return prompt;
}

std::pair<int, double> aggregate_hybrid(const std::vector<std::vector<ParsedGuess>>& responses) {
  if (responses.empty()) throw ConfigError("aggregate_hybrid: no responses");
  for (const auto& r : responses)
    if (r.empty()) throw ConfigError("aggregate_hybrid: empty parsed response");

  std::map<int, int> top1_votes;
  std::map<int, double> summed_confidence;
  for (const auto& r : responses) {
    ++top1_votes[r[0].label_index];
    for (const auto& guess : r) summed_confidence[guess.label_index] += guess.confidence;
  }

  int winner = -1;
  for (const auto& [label, votes] : top1_votes) {
    if (winner == -1) {
      winner = label;
      continue;
    }
    const int best_votes = top1_votes[winner];
    if (votes > best_votes ||
        (votes == best_votes && summed_confidence[label] > summed_confidence[winner])) {
      winner = label;
    }
    // equal votes and equal summed confidence keep the lower class index,
    // which map order already guarantees
  }

  double total = 0.0;
  for (const auto& r : responses) {
    double conf = 0.0;
    for (const auto& guess : r)
      if (guess.label_index == winner) {
        conf = guess.confidence;
        break;
      }
    total += conf;
  }
  return {winner, total / static_cast<double>(responses.size())};
}

std::uint64_t estimate_tokens(const std::string& text) {
  return (static_cast<std::uint64_t>(text.size()) + 3) / 4;
}

CostReport estimate_cost(const std::vector<std::string>& prompts,
                         const std::vector<std::string>& completions, const PriceTable& prices) {
  CostReport report;
  for (const auto& p : prompts) report.prompt_tokens_estimate += estimate_tokens(p);
  for (const auto& c : completions) report.completion_tokens_estimate += estimate_tokens(c);
  report.requests = prompts.size();
  report.dollars_estimate =
      static_cast<double>(report.prompt_tokens_estimate) / 1000.0 * prices.prompt_per_1k +
      static_cast<double>(report.completion_tokens_estimate) / 1000.0 * prices.completion_per_1k;
  return report;
}

// ---------------------------------------------------------------------------
// Simulated oracle
// ---------------------------------------------------------------------------

Matrix uniform_off_diagonal_transition(std::size_t classes) {
  Matrix t(classes, classes, 0.0);
  const double share = 1.0 / static_cast<double>(classes - 1);
  for (std::size_t i = 0; i < classes; ++i)
    for (std::size_t j = 0; j < classes; ++j)
      if (i != j) t(i, j) = share;
  return t;
}

Matrix successor_biased_transition(std::size_t classes, double dominant_mass) {
  if (classes < 2) throw ConfigError("transition: need at least 2 classes");
  if (dominant_mass < 0.0 || dominant_mass > 1.0)
    throw ConfigError("transition: dominant_mass must be in [0,1]");
  Matrix t(classes, classes, 0.0);
  const double rest =
      classes > 2 ? (1.0 - dominant_mass) / static_cast<double>(classes - 2) : 0.0;
  for (std::size_t i = 0; i < classes; ++i) {
    const std::size_t next = (i + 1) % classes;
    for (std::size_t j = 0; j < classes; ++j) {
      if (j == i) continue;
      t(i, j) = (j == next) ? (classes > 2 ? dominant_mass : 1.0) : rest;
    }
  }
  return t;
}

namespace {

void validate_noise_model(const OracleNoiseModel& model, std::size_t classes) {
  if (model.base_accuracy < 0.0 || model.base_accuracy > 1.0)
    throw ConfigError("noise model: base_accuracy must be in [0,1]");
  if (model.confidence_calibration < 0.0 || model.confidence_calibration > 1.0)
    throw ConfigError("noise model: confidence_calibration must be in [0,1]");
  if (model.transition.empty()) return;
  if (model.transition.rows() != classes || model.transition.cols() != classes)
    throw ConfigError("noise model: transition matrix shape mismatch");
  for (std::size_t i = 0; i < classes; ++i) {
    if (model.transition(i, i) != 0.0)
      throw ConfigError("noise model: transition diagonal must be zero");
    double row = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      if (model.transition(i, j) < 0.0) throw ConfigError("noise model: negative transition");
      row += model.transition(i, j);
    }
    if (std::abs(row - 1.0) > 1e-9)
      throw ConfigError("noise model: transition row " + std::to_string(i) + " does not sum to 1");
  }
}

struct SimulatedDraw {
  int label;
  double confidence;  // in [0, 100]
};

SimulatedDraw simulated_draw(const TextAttributedGraph& graph, const OracleNoiseModel& model,
                             const std::vector<double>& cdensity, std::uint32_t node_id,
                             int query_index) {
  if (!graph.has_gold()) throw ConfigError("simulated oracle requires gold labels");
  const int gold = graph.gold_labels[node_id];
  if (gold < 0) throw ConfigError("simulated oracle: node " + std::to_string(node_id) +
                                  " has no gold label");
  const std::size_t classes = graph.class_count();

  Rng rng(derive_seed(model.seed,
                      "node/" + std::to_string(node_id) + "/q" + std::to_string(query_index)));
  const double p = std::min(
      1.0, std::max(0.0, model.base_accuracy + model.density_slope * cdensity[node_id]));

  int label = gold;
  if (rng.next_double() >= p) {
    const double r = rng.next_double();
    double acc = 0.0;
    label = static_cast<int>(classes) - 1;
    if (label == gold) --label;
    for (std::size_t j = 0; j < classes; ++j) {
      if (static_cast<int>(j) == gold) continue;
      const double mass = model.transition.empty()
                              ? 1.0 / static_cast<double>(classes - 1)
                              : model.transition(static_cast<std::size_t>(gold), j);
      acc += mass;
      if (r < acc) {
        label = static_cast<int>(j);
        break;
      }
    }
  }

  double confidence = 100.0 * p;
  if (model.confidence_calibration < 1.0) {
    confidence = model.confidence_calibration * confidence +
                 (1.0 - model.confidence_calibration) * 100.0 * rng.next_double();
  }
  return {label, confidence};
}

}  // namespace

Annotation simulated_annotate(const TextAttributedGraph& graph, const OracleNoiseModel& model,
                              const std::vector<double>& cdensity, std::uint32_t node_id) {
  validate_noise_model(model, graph.class_count());
  const auto draw = simulated_draw(graph, model, cdensity, node_id, 0);
  Annotation annotation;
  annotation.node_id = node_id;
  annotation.label_index = draw.label;
  annotation.confidence = draw.confidence;
  annotation.strategy = "simulated";
  annotation.attempts = 1;
  annotation.is_simulated = true;
  return annotation;
}

namespace {

class SimulatedBackend final : public ChatBackend {
 public:
  SimulatedBackend(const TextAttributedGraph& graph, OracleNoiseModel model,
                   std::vector<double> cdensity)
      : graph_(graph), model_(std::move(model)), cdensity_(std::move(cdensity)) {
    validate_noise_model(model_, graph_.class_count());
  }

  Completion complete(std::uint32_t node_id, int query_index, const std::string&,
                      double, int guesses_wanted) override {
    const auto draw = simulated_draw(graph_, model_, cdensity_, node_id, query_index);
    const std::size_t classes = graph_.class_count();
    const int k = std::min<int>(std::max(1, guesses_wanted), static_cast<int>(classes));

    const long top = std::lround(draw.confidence);
    json array = json::array();
    array.push_back({{"answer", lowered(draw.label)}, {"confidence", top}});
    // spread the remaining confidence over the next class indices
    long remaining = 100 - top;
    for (int g = 1; g < k; ++g) {
      const int label = static_cast<int>((draw.label + g) % static_cast<int>(classes));
      const long share = remaining / (k - g);
      array.push_back({{"answer", lowered(label)}, {"confidence", share}});
      remaining -= share;
    }
    Completion out;
    out.content = array.dump();
    return out;
  }

  bool is_simulated() const override { return true; }

 private:
  std::string lowered(int label) const {
    std::string name = graph_.class_names[static_cast<std::size_t>(label)];
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return name;
  }

  const TextAttributedGraph& graph_;
  OracleNoiseModel model_;
  std::vector<double> cdensity_;
};

class LiveBackend final : public ChatBackend {
 public:
  explicit LiveBackend(const LiveBackendConfig& config) : config_(config) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
      throw BackendError("live backend: environment variable " + config.api_key_env + " not set");
    api_key_ = key;
  }

  Completion complete(std::uint32_t, int, const std::string& prompt, double temperature,
                      int) override {
    json body;
    body["model"] = config_.model;
    body["temperature"] = temperature;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
    const std::string payload = body.dump();

    httplib::Client client(config_.endpoint);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int>(config_.timeout_seconds * 1000)));
    client.set_read_timeout(
        std::chrono::milliseconds(static_cast<int>(config_.timeout_seconds * 1000)));
    httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};

    std::string last_error;
    for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config_.backoff_base_ms * (1L << (attempt - 1))));
      }
      auto res = client.Post(config_.path, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw BackendError("live backend: status " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 200));
      json reply = json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
        throw BackendError("live backend: malformed completion payload");
      Completion out;
      out.content = reply["choices"][0]["message"]["content"].get<std::string>();
      if (reply.contains("usage")) {
        out.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
        out.completion_tokens = reply["usage"].value("completion_tokens", 0);
        out.reported_usage = true;
      }
      return out;
    }
    throw BackendError("live backend: retries exhausted (" + last_error + ")");
  }

  bool is_simulated() const override { return false; }

 private:
  LiveBackendConfig config_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<ChatBackend> make_simulated_backend(const TextAttributedGraph& graph,
                                                    OracleNoiseModel model,
                                                    std::vector<double> cdensity) {
  return std::make_unique<SimulatedBackend>(graph, std::move(model), std::move(cdensity));
}

std::unique_ptr<ChatBackend> make_live_backend(const LiveBackendConfig& config) {
  return std::make_unique<LiveBackend>(config);
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

AnnotationCache::AnnotationCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json entry = json::parse(line, nullptr, false);
    if (entry.is_discarded()) throw ConfigError("annotation cache: malformed line in " + path_);
    Annotation a;
    a.node_id = entry.at("node_id").get<std::uint32_t>();
    a.label_index = entry.at("label").get<int>();
    a.confidence = entry.at("confidence").get<double>();
    a.strategy = entry.at("strategy").get<std::string>();
    a.attempts = entry.value("attempts", 1);
    a.is_simulated = entry.value("simulated", false);
    if (entry.contains("raw"))
      for (const auto& r : entry["raw"]) a.raw_responses.push_back(r.get<std::string>());
    entries_[{a.node_id, a.strategy}] = a;
  }
}

std::optional<Annotation> AnnotationCache::lookup(std::uint32_t node_id,
                                                  const std::string& strategy) const {
  auto it = entries_.find({node_id, strategy});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void AnnotationCache::append(const Annotation& annotation) {
  entries_[{annotation.node_id, annotation.strategy}] = annotation;
  json entry;
  entry["node_id"] = annotation.node_id;
  entry["label"] = annotation.label_index;
  entry["confidence"] = annotation.confidence;
  entry["strategy"] = annotation.strategy;
  entry["attempts"] = annotation.attempts;
  entry["simulated"] = annotation.is_simulated;
  entry["raw"] = annotation.raw_responses;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw ConfigError("annotation cache: cannot append to " + path_);
  out << entry.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Batch annotation
// ---------------------------------------------------------------------------

AnnotateResult annotate_batch(ChatBackend& backend, const TextAttributedGraph& graph,
                              const std::vector<std::uint32_t>& node_ids,
                              const AnnotateOptions& options, AnnotationCache* cache) {
  const auto& strategy = options.strategy;
  const int queries = queries_per_node(strategy);
  const int guesses_wanted = wants_topk(strategy.kind) ? strategy.top_k : 1;
  const std::string strategy_tag = to_string(strategy.kind);

  AnnotateResult result;
  result.annotations.resize(node_ids.size());
  std::vector<bool> from_cache(node_ids.size(), false);
  std::vector<bool> completed(node_ids.size(), false);

  std::mutex state_mutex;
  std::ofstream transcript;
  if (!options.transcript_path.empty()) {
    transcript.open(options.transcript_path, std::ios::app);
    if (!transcript) throw ConfigError("cannot open transcript " + options.transcript_path);
  }
  bool abort_on_cap = false;

  auto record_request = [&](const std::string& prompt, const ChatBackend::Completion& completion,
                            bool is_retry, std::uint32_t node, int query, int attempt) {
    std::lock_guard<std::mutex> lock(state_mutex);
    result.cost.requests += 1;
    if (is_retry) result.cost.retries += 1;
    result.cost.prompt_tokens_estimate += estimate_tokens(prompt);
    result.cost.completion_tokens_estimate += estimate_tokens(completion.content);
    if (completion.reported_usage) {
      result.cost.reported_prompt_tokens += completion.prompt_tokens;
      result.cost.reported_completion_tokens += completion.completion_tokens;
    }
    result.cost.dollars_estimate =
        static_cast<double>(result.cost.prompt_tokens_estimate) / 1000.0 *
            options.prices.prompt_per_1k +
        static_cast<double>(result.cost.completion_tokens_estimate) / 1000.0 *
            options.prices.completion_per_1k;
    if (transcript.is_open()) {
      transcript << "=== node " << node << " query " << query << " attempt " << attempt
                 << "\n--- prompt\n" << prompt << "\n--- response\n" << completion.content
                 << "\n";
    }
    if (!backend.is_simulated() && options.max_dollars > 0.0 &&
        result.cost.dollars_estimate >= options.max_dollars) {
      abort_on_cap = true;
    }
  };

  auto capped = [&]() {
    std::lock_guard<std::mutex> lock(state_mutex);
    return abort_on_cap;
  };

  auto annotate_node = [&](std::size_t slot) {
    const std::uint32_t node = node_ids[slot];
    if (node >= graph.node_count) throw ConfigError("annotate: node id out of range");

    if (cache != nullptr) {
      std::lock_guard<std::mutex> lock(state_mutex);
      if (auto hit = cache->lookup(node, strategy_tag)) {
        result.annotations[slot] = *hit;
        from_cache[slot] = true;
        completed[slot] = true;
        ++result.cache_hits;
        return;
      }
    }

    Annotation annotation;
    annotation.node_id = node;
    annotation.strategy = strategy_tag;
    annotation.is_simulated = backend.is_simulated();

    const std::string text = graph.texts.empty() ? std::string() : graph.texts[node];
    const std::string base_prompt = build_prompt(strategy, text, graph.class_names);

    bool cap_interrupted = false;
    std::vector<std::vector<ParsedGuess>> parsed;
    for (int q = 0; q < queries; ++q) {
      if (capped()) {
        cap_interrupted = true;
        break;
      }
      std::string prompt = base_prompt;
      for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        if (capped()) {
          cap_interrupted = true;
          break;
        }
        const double temperature =
            attempt == 0 ? strategy.temperature_primary : strategy.temperature_correction;
        ChatBackend::Completion completion;
        try {
          completion = backend.complete(node, q, prompt, temperature, guesses_wanted);
        } catch (const BackendError&) {
          annotation.attempts += 1;
          // transport exhausted for this query; the node may still abstain
          break;
        }
        annotation.attempts += 1;
        annotation.raw_responses.push_back(completion.content);
        record_request(prompt, completion, attempt > 0, node, q, attempt);

        const auto outcome = parse_response(completion.content, graph.class_names);
        if (outcome.ok) {
          parsed.push_back(outcome.guesses);
          break;
        }
        prompt = build_self_correction_prompt(prompt, completion.content, outcome,
                                              graph.class_names);
      }
    }

    if (parsed.empty()) {
      annotation.label_index = kAbstain;
      annotation.confidence = 0.0;
    } else if (strategy.kind == PromptKind::vanilla_zero_shot ||
               strategy.kind == PromptKind::topk) {
      annotation.label_index = parsed[0][0].label_index;
      annotation.confidence = parsed[0][0].confidence;
    } else {
      const auto [label, confidence] = aggregate_hybrid(parsed);
      annotation.label_index = label;
      annotation.confidence = confidence;
    }
    result.annotations[slot] = annotation;
    completed[slot] = !cap_interrupted;
  };

  const int workers = std::max(1, std::min<int>(options.concurrency,
                                                static_cast<int>(node_ids.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < node_ids.size() && !capped(); ++i) annotate_node(i);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = cursor.fetch_add(1);
          if (i >= node_ids.size() || capped()) return;
          try {
            annotate_node(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // single-writer cache append, completed nodes only
  if (cache != nullptr) {
    for (std::size_t i = 0; i < node_ids.size(); ++i) {
      if (from_cache[i] || !completed[i]) continue;
      cache->append(result.annotations[i]);
    }
  }

  if (capped())
    throw BudgetCapExceeded("annotation stopped at $" +
                            std::to_string(result.cost.dollars_estimate) +
                            " estimated spend (cap " + std::to_string(options.max_dollars) +
                            "); cache retained");
  return result;
}

}  // namespace annograph
