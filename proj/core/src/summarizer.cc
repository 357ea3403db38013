#include "neutralsum/summarizer.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "http_transport.h"
#include "neutralsum/error.h"

namespace neutralsum {
namespace {

constexpr std::string_view kWhitespace = " \t\n\r\f\v";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(kWhitespace);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(kWhitespace);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (true) {
    i = text.find_first_not_of(kWhitespace, i);
    if (i == std::string_view::npos) break;
    std::size_t j = text.find_first_of(kWhitespace, i);
    if (j == std::string_view::npos) j = text.size();
    words.push_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string join_words(const std::vector<std::string_view>& words, std::size_t n) {
  std::string out;
  for (std::size_t k = 0; k < n && k < words.size(); ++k) {
    if (k > 0) out += ' ';
    out += words[k];
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

std::string first_sentence(std::string_view article) {
  article = trim(article);
  for (std::size_t i = 0; i < article.size(); ++i) {
    const char c = article[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == article.size() || article[i + 1] == ' ')) {
      return std::string(article.substr(0, i + 1));
    }
  }
  return std::string(article);
}

}  // namespace

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::kBaseline: return "baseline";
    case PromptKind::kGraph: return "graph";
    case PromptKind::kOneShot: return "one_shot";
    case PromptKind::kCotGraph: return "cot_graph";
  }
  return "baseline";
}

PromptKind parse_prompt_kind(std::string_view s) {
  for (PromptKind k : kAllPromptKinds) {
    if (to_string(k) == s) return k;
  }
  throw SchemaError("unknown prompt kind '" + std::string(s) + "'");
}

bool uses_tables(PromptKind kind) { return kind == PromptKind::kGraph; }

bool uses_example(PromptKind kind) {
  return kind == PromptKind::kOneShot || kind == PromptKind::kCotGraph;
}

void LlmRequest::check() const {
  if (prompt.empty()) throw SchemaError("request prompt is empty");
  if (max_input_tokens <= 0 || max_output_tokens <= 0) {
    throw SchemaError("request token budgets must be positive");
  }
}

void to_json(Json& j, const RequestMetadata& m) {
  j = Json{{"prompt_kind", to_string(m.prompt_kind)},
           {"estimated_tokens", m.estimated_tokens},
           {"truncated", m.truncated},
           {"article_word_cap", m.article_word_cap},
           {"article_words", m.article_words},
           {"kept_article_words", m.kept_article_words}};
}

void from_json(const Json& j, RequestMetadata& m) {
  m.prompt_kind = parse_prompt_kind(j.at("prompt_kind").get<std::string>());
  j.at("estimated_tokens").get_to(m.estimated_tokens);
  j.at("truncated").get_to(m.truncated);
  j.at("article_word_cap").get_to(m.article_word_cap);
  j.at("article_words").get_to(m.article_words);
  j.at("kept_article_words").get_to(m.kept_article_words);
}

void to_json(Json& j, const LlmRequest& r) {
  j = Json{{"model_id", r.model_id},
           {"prompt", r.prompt},
           {"max_input_tokens", r.max_input_tokens},
           {"max_output_tokens", r.max_output_tokens},
           {"temperature", r.temperature},
           {"metadata", r.metadata}};
}

void from_json(const Json& j, LlmRequest& r) {
  j.at("model_id").get_to(r.model_id);
  j.at("prompt").get_to(r.prompt);
  j.at("max_input_tokens").get_to(r.max_input_tokens);
  j.at("max_output_tokens").get_to(r.max_output_tokens);
  j.at("temperature").get_to(r.temperature);
  j.at("metadata").get_to(r.metadata);
  r.check();
}

void to_json(Json& j, const SummaryRecord& r) {
  j = Json{{"cluster_id", r.cluster_id},
           {"prompt_kind", to_string(r.prompt_kind)},
           {"summary_text", r.summary_text},
           {"latency_ms", r.latency_ms},
           {"provider_metadata", r.provider_metadata}};
}

void from_json(const Json& j, SummaryRecord& r) {
  j.at("cluster_id").get_to(r.cluster_id);
  r.prompt_kind = parse_prompt_kind(j.at("prompt_kind").get<std::string>());
  j.at("summary_text").get_to(r.summary_text);
  j.at("latency_ms").get_to(r.latency_ms);
  r.provider_metadata = j.at("provider_metadata");
  if (r.summary_text.empty()) throw SchemaError("summary record has empty summary_text");
}

void to_json(Json& j, const PromptExample& e) {
  j = Json{{"articles", e.articles}, {"summary", e.summary}, {"explanation", e.explanation}};
}

void from_json(const Json& j, PromptExample& e) {
  j.at("articles").get_to(e.articles);
  j.at("summary").get_to(e.summary);
  e.explanation = j.value("explanation", std::string());
}

std::size_t estimate_tokens(std::string_view text) {
  const auto n = static_cast<double>(split_words(text).size());
  return static_cast<std::size_t>(std::ceil(n * 1.3));
}

LlmRequest build_request(const ClusterInput& cluster, PromptKind kind, const PromptTemplate& tmpl,
                         const Budget& budget, const PromptExample* example) {
  const bool has_tables = tmpl.has_placeholder(placeholder::kEventTable) ||
                          tmpl.has_placeholder(placeholder::kRelationTable);
  if (uses_tables(kind) != has_tables) {
    throw SchemaError("template '" + tmpl.name() + "' does not match prompt kind " +
                      std::string(to_string(kind)));
  }
  if (uses_tables(kind) && !cluster.tables) {
    throw SchemaError("prompt kind " + std::string(to_string(kind)) + " needs graph tables");
  }
  if (uses_example(kind) && example == nullptr) {
    throw SchemaError("prompt kind " + std::string(to_string(kind)) + " needs an example");
  }

  PlaceholderValues extra;
  if (example != nullptr) {
    for (std::size_t k = 0; k < example->articles.size(); ++k) {
      extra[placeholder::example_article(k + 1)] = normalize_newlines(example->articles[k]);
    }
    extra[std::string(placeholder::kExampleSummary)] = example->summary;
    extra[std::string(placeholder::kExampleExplanation)] = example->explanation;
  }
  const GraphTables empty_tables;
  const GraphTables& tables = cluster.tables ? *cluster.tables : empty_tables;

  std::vector<std::vector<std::string_view>> words;
  for (const std::string& a : cluster.articles) words.push_back(split_words(a));
  std::size_t longest = 0;
  for (const auto& w : words) longest = std::max(longest, w.size());

  // cap == npos keeps the articles verbatim.
  auto render_with_cap = [&](std::size_t cap) {
    std::vector<std::string> articles;
    for (std::size_t k = 0; k < cluster.articles.size(); ++k) {
      articles.push_back(cap == std::string::npos || words[k].size() <= cap
                             ? cluster.articles[k]
                             : join_words(words[k], cap));
    }
    return render_hard_prompt(tables, articles, tmpl, extra);
  };

  LlmRequest req;
  req.model_id = budget.model_id;
  req.max_input_tokens = budget.max_input_tokens;
  req.max_output_tokens = budget.max_output_tokens;
  req.temperature = budget.temperature;
  RequestMetadata& meta = req.metadata;
  meta.prompt_kind = kind;
  for (const auto& w : words) meta.article_words.push_back(w.size());

  const auto limit = static_cast<std::size_t>(std::max(budget.max_input_tokens, 0));
  req.prompt = render_with_cap(std::string::npos);
  meta.estimated_tokens = estimate_tokens(req.prompt);
  if (meta.estimated_tokens > limit) {
    const std::size_t fixed = estimate_tokens(render_with_cap(0));
    if (fixed > limit) {
      throw BudgetError("cluster " + cluster.cluster_id + ": template, tables and example need ~" +
                        std::to_string(fixed) + " tokens, over the input budget of " +
                        std::to_string(limit));
    }
    std::size_t lo = 0;  // fits
    std::size_t hi = longest;  // does not fit
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      (estimate_tokens(render_with_cap(mid)) <= limit ? lo : hi) = mid;
    }
    req.prompt = render_with_cap(lo);
    meta.estimated_tokens = estimate_tokens(req.prompt);
    meta.truncated = true;
    meta.article_word_cap = lo;
  }
  for (const auto& w : words) {
    meta.kept_article_words.push_back(meta.truncated ? std::min(w.size(), meta.article_word_cap)
                                                     : w.size());
  }
  req.check();
  return req;
}

std::string extract_cot_summary(std::string_view completion) {
  constexpr std::string_view kMarker = "Summary:";
  const auto pos = completion.rfind(kMarker);
  if (pos == std::string_view::npos) return std::string(trim(completion));
  return std::string(trim(completion.substr(pos + kMarker.size())));
}

// --- endpoints ----------------------------------------------------------------

HttpEndpoint::HttpEndpoint(HttpEndpointConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("http endpoint needs a base_url");
}

Completion HttpEndpoint::complete(const LlmRequest& request) {
  const Json body{{"model", request.model_id},
                  {"messages", Json::array({Json{{"role", "user"}, {"content", request.prompt}}})},
                  {"max_tokens", request.max_output_tokens},
                  {"temperature", request.temperature}};
  internal::HttpHeaders headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  const internal::HttpResponse res =
      internal::http_post_json(config_.base_url, config_.path, body.dump(), headers, config_.timeout_s);

  const std::string where = name() + config_.path;
  if (res.status == 401 || res.status == 403) {
    throw RemoteError(RemoteError::Kind::kAuth, where + ": HTTP " + std::to_string(res.status));
  }
  if (res.status == 408) {
    throw RemoteError(RemoteError::Kind::kTimeout, where + ": HTTP 408");
  }
  if (res.status == 429 || res.status >= 500) {
    throw RemoteError(RemoteError::Kind::kTransient, where + ": HTTP " + std::to_string(res.status));
  }
  if (res.status != 200) {
    throw RemoteError(RemoteError::Kind::kProtocol, where + ": HTTP " + std::to_string(res.status));
  }
  Completion out;
  try {
    const Json j = Json::parse(res.body);
    const Json& choice = j.at("choices").at(0);
    const Json& content = choice.at("message").at("content");
    if (!content.is_null()) out.text = content.get<std::string>();
    if (j.contains("model")) out.metadata["model"] = j["model"];
    if (j.contains("usage")) out.metadata["usage"] = j["usage"];
    if (choice.contains("finish_reason")) out.metadata["finish_reason"] = choice["finish_reason"];
  } catch (const Json::exception& e) {
    throw RemoteError(RemoteError::Kind::kProtocol, where + ": malformed response: " + e.what());
  }
  return out;
}

std::vector<MockEndpoint::Rule> MockEndpoint::load_rules(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  std::vector<Rule> rules;
  try {
    for (const Json& r : j.at("rules")) {
      rules.push_back({r.at("contains").get<std::string>(), r.at("response").get<std::string>()});
    }
  } catch (const Json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return rules;
}

std::string MockEndpoint::lead_summary(std::string_view prompt) {
  std::string_view body = trim(prompt);
  bool cot = false;
  for (std::string_view tail : {std::string_view(" Summary:"), std::string_view(" Output:")}) {
    if (body.ends_with(tail)) {
      cot = tail == " Output:";
      body.remove_suffix(tail.size());
      break;
    }
  }
  // The template closes the last article with its own period.
  if (body.ends_with("..") || body.ends_with("!.") || body.ends_with("?.")) body.remove_suffix(1);
  const auto text_pos = body.rfind("Text: ");
  if (text_pos != std::string_view::npos) body.remove_prefix(text_pos + 6);

  std::string lead;
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t sep = body.find(kArticleSeparator, start);
    if (sep == std::string_view::npos) sep = body.size();
    const std::string s = first_sentence(body.substr(start, sep - start));
    if (!s.empty()) {
      if (!lead.empty()) lead += ' ';
      lead += s;
    }
    start = sep + kArticleSeparator.size();
  }
  if (!cot) return lead;
  return "Firstly, explain the events reported in each article and the relations between events. "
         "The articles report the same main event. Secondly, generate the summary. Summary: " +
         lead;
}

Completion MockEndpoint::complete(const LlmRequest& request) {
  ++calls_;
  for (const Rule& r : rules_) {
    if (request.prompt.find(r.contains) != std::string::npos) {
      return {r.response, Json{{"mock_rule", r.contains}}};
    }
  }
  return {lead_summary(request.prompt), Json{{"mock_rule", "lead"}}};
}

// --- client -------------------------------------------------------------------

SummarizerClient::SummarizerClient(CompletionEndpoint& endpoint, ClientOptions options)
    : endpoint_(endpoint), options_(std::move(options)) {
  if (options_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string SummarizerClient::cache_key(std::string_view model_id, std::string_view prompt) {
  std::string material = std::to_string(model_id.size());
  material += ':';
  material += model_id;
  material += prompt;
  return sha256_hex(material);
}

std::filesystem::path SummarizerClient::cache_path(const LlmRequest& request) const {
  return options_.cache_dir / (cache_key(request.model_id, request.prompt) + ".json");
}

std::optional<Completion> SummarizerClient::cache_get(const LlmRequest& request) {
  if (options_.cache_dir.empty()) return std::nullopt;
  const std::lock_guard lock(cache_mu_);
  const auto path = cache_path(request);
  if (!std::filesystem::exists(path)) return std::nullopt;
  const Json j = read_json_file(path);
  try {
    // Guard against a hash collision or a hand-edited file.
    if (j.at("model_id").get<std::string>() != request.model_id ||
        j.at("prompt").get<std::string>() != request.prompt) {
      return std::nullopt;
    }
    return Completion{j.at("completion").get<std::string>(), j.at("metadata")};
  } catch (const Json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void SummarizerClient::cache_put(const LlmRequest& request, const Completion& completion) {
  if (options_.cache_dir.empty()) return;
  const std::lock_guard lock(cache_mu_);
  write_json_file(cache_path(request), Json{{"model_id", request.model_id},
                                            {"prompt", request.prompt},
                                            {"completion", completion.text},
                                            {"metadata", completion.metadata}});
}

Completion SummarizerClient::call_with_retry(const LlmRequest& request, int& attempts) {
  auto backoff = options_.initial_backoff;
  for (attempts = 1;; ++attempts) {
    try {
      return endpoint_.complete(request);
    } catch (const RemoteError& e) {
      const bool retryable =
          e.kind() == RemoteError::Kind::kTransient || e.kind() == RemoteError::Kind::kTimeout;
      if (!retryable) throw;
      if (attempts >= options_.max_attempts) {
        throw RemoteError(e.kind(), std::string(e.what()) + " (gave up after " +
                                        std::to_string(attempts) + " attempts)");
      }
      options_.sleep(backoff);
      backoff = std::chrono::milliseconds(static_cast<long long>(
          static_cast<double>(backoff.count()) * options_.backoff_multiplier));
    }
  }
}

SummaryRecord SummarizerClient::summarize(const LlmRequest& request, const std::string& cluster_id) {
  request.check();
  const auto t0 = std::chrono::steady_clock::now();
  int attempts = 0;
  std::optional<Completion> completion = cache_get(request);
  const bool cached = completion.has_value();
  if (!cached) {
    completion = call_with_retry(request, attempts);
    if (trim(completion->text).empty()) {
      throw RemoteError(RemoteError::Kind::kEmptyCompletion,
                        endpoint_.name() + " returned an empty completion for cluster " + cluster_id);
    }
    cache_put(request, *completion);
  }

  SummaryRecord rec;
  rec.cluster_id = cluster_id;
  rec.prompt_kind = request.metadata.prompt_kind;
  rec.summary_text = rec.prompt_kind == PromptKind::kCotGraph
                         ? extract_cot_summary(completion->text)
                         : std::string(trim(completion->text));
  if (rec.summary_text.empty()) {
    throw RemoteError(RemoteError::Kind::kEmptyCompletion,
                      "completion for cluster " + cluster_id + " has no summary text");
  }
  rec.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  rec.provider_metadata = completion->metadata;
  rec.provider_metadata["endpoint"] = endpoint_.name();
  rec.provider_metadata["model_id"] = request.model_id;
  rec.provider_metadata["cached"] = cached;
  rec.provider_metadata["attempts"] = attempts;
  rec.provider_metadata["truncated"] = request.metadata.truncated;
  rec.provider_metadata["estimated_tokens"] = request.metadata.estimated_tokens;
  return rec;
}

std::vector<SummaryRecord> SummarizerClient::summarize_batch(std::span<const Job> jobs,
                                                             int parallelism) {
  std::vector<SummaryRecord> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        out[i] = summarize(jobs[i].request, jobs[i].cluster_id);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(parallelism, 1)), jobs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace neutralsum
