#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neutralsum/json_io.h"
#include "neutralsum/prompt_template.h"
#include "neutralsum/textualizer.h"

namespace neutralsum {

enum class PromptKind { kBaseline, kGraph, kOneShot, kCotGraph };

inline constexpr PromptKind kAllPromptKinds[] = {PromptKind::kBaseline, PromptKind::kGraph,
                                                 PromptKind::kOneShot, PromptKind::kCotGraph};

std::string_view to_string(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view s);  // throws SchemaError
bool uses_tables(PromptKind kind);
bool uses_example(PromptKind kind);

struct RequestMetadata {
  PromptKind prompt_kind = PromptKind::kBaseline;
  std::size_t estimated_tokens = 0;
  bool truncated = false;
  // Per-article word cap applied when truncated; 0 otherwise.
  std::size_t article_word_cap = 0;
  std::vector<std::size_t> article_words;       // before truncation
  std::vector<std::size_t> kept_article_words;  // after truncation
};

struct LlmRequest {
  std::string model_id;
  std::string prompt;
  int max_input_tokens = 2048;
  int max_output_tokens = 512;
  double temperature = 0.0;
  RequestMetadata metadata;

  // Throws SchemaError for an empty prompt or non-positive budget.
  void check() const;
};

struct SummaryRecord {
  std::string cluster_id;
  PromptKind prompt_kind = PromptKind::kBaseline;
  std::string summary_text;
  double latency_ms = 0;
  Json provider_metadata = Json::object();
};

void to_json(Json& j, const RequestMetadata& m);
void from_json(const Json& j, RequestMetadata& m);
void to_json(Json& j, const LlmRequest& r);
void from_json(const Json& j, LlmRequest& r);
void to_json(Json& j, const SummaryRecord& r);
void from_json(const Json& j, SummaryRecord& r);

// ceil(whitespace-separated tokens * 1.3)
std::size_t estimate_tokens(std::string_view text);

// Articles in dataset order plus the hard-prompt tables for graph kinds.
struct ClusterInput {
  std::string cluster_id;
  std::vector<std::string> articles;
  std::optional<GraphTables> tables;
};

// Demonstration for the one-shot and chain-of-thought kinds.
struct PromptExample {
  std::vector<std::string> articles;
  std::string summary;
  std::string explanation;
};

void to_json(Json& j, const PromptExample& e);
void from_json(const Json& j, PromptExample& e);

struct Budget {
  std::string model_id;
  int max_input_tokens = 2048;
  int max_output_tokens = 512;
  double temperature = 0.0;
};

// Renders the prompt. When the estimate exceeds the input budget every
// article is cut to the same leading word count, chosen as large as fits;
// template text, tables and the example are never cut. Throws BudgetError if
// the prompt with empty articles is already over budget, and SchemaError if
// the kind needs tables or an example that was not supplied.
LlmRequest build_request(const ClusterInput& cluster, PromptKind kind, const PromptTemplate& tmpl,
                         const Budget& budget, const PromptExample* example = nullptr);

// Text after the last "Summary:" marker, trimmed; the whole trimmed text when
// the marker is absent.
std::string extract_cot_summary(std::string_view completion);

struct Completion {
  std::string text;
  Json metadata = Json::object();
};

class CompletionEndpoint {
 public:
  virtual ~CompletionEndpoint() = default;
  // Throws RemoteError classified by kind.
  virtual Completion complete(const LlmRequest& request) = 0;
  virtual std::string name() const = 0;
};

// OpenAI-compatible chat completions endpoint.
struct HttpEndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string api_key;
  double timeout_s = 60.0;
};

class HttpEndpoint : public CompletionEndpoint {
 public:
  explicit HttpEndpoint(HttpEndpointConfig config);
  Completion complete(const LlmRequest& request) override;
  std::string name() const override { return "http:" + config_.base_url; }

 private:
  HttpEndpointConfig config_;
};

// Canned responses for tests and offline runs. The first rule whose needle
// occurs in the prompt wins; otherwise the reply is a lead summary built from
// the first sentence of each article in the prompt (wrapped in the
// chain-of-thought scaffold when the prompt ends with "Output:").
class MockEndpoint : public CompletionEndpoint {
 public:
  struct Rule {
    std::string contains;
    std::string response;
  };

  MockEndpoint() = default;
  explicit MockEndpoint(std::vector<Rule> rules) : rules_(std::move(rules)) {}
  // {"rules": [{"contains": ..., "response": ...}]}
  static std::vector<Rule> load_rules(const std::filesystem::path& path);

  Completion complete(const LlmRequest& request) override;
  std::string name() const override { return "mock"; }
  std::size_t calls() const { return calls_.load(); }

  static std::string lead_summary(std::string_view prompt);

 private:
  std::vector<Rule> rules_;
  std::atomic<std::size_t> calls_{0};
};

struct ClientOptions {
  std::filesystem::path cache_dir;  // empty disables the cache
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double backoff_multiplier = 2.0;
  // Replaced in tests to avoid real sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Retries transient failures and timeouts with exponential backoff, caches
// completions on disk keyed by sha256(model_id, prompt). Safe to share
// across threads.
class SummarizerClient {
 public:
  SummarizerClient(CompletionEndpoint& endpoint, ClientOptions options = {});

  SummaryRecord summarize(const LlmRequest& request, const std::string& cluster_id);

  struct Job {
    std::string cluster_id;
    LlmRequest request;
  };
  // Runs jobs with at most `parallelism` in flight; results keep job order.
  std::vector<SummaryRecord> summarize_batch(std::span<const Job> jobs, int parallelism = 4);

  std::filesystem::path cache_path(const LlmRequest& request) const;
  static std::string cache_key(std::string_view model_id, std::string_view prompt);

 private:
  std::optional<Completion> cache_get(const LlmRequest& request);
  void cache_put(const LlmRequest& request, const Completion& completion);
  Completion call_with_retry(const LlmRequest& request, int& attempts);

  CompletionEndpoint& endpoint_;
  ClientOptions options_;
  std::mutex cache_mu_;
};

}  // namespace neutralsum
