#include "neutralsum/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "neutralsum/error.h"
#include "neutralsum/model_service.h"
#include "neutralsum/report.h"
#include "neutralsum/textualizer.h"

namespace neutralsum {

namespace fs = std::filesystem;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kBuild: return "build";
    case Stage::kTextualize: return "textualize";
    case Stage::kEncode: return "encode";
    case Stage::kSummarize: return "summarize";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kReport: return "report";
  }
  return "ingest";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown stage '" + std::string(s) + "'");
}

std::vector<Stage> parse_stages(std::string_view list) {
  std::set<Stage> picked;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t comma = list.find(',', start);
    if (comma == std::string_view::npos) comma = list.size();
    std::string_view item = list.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) picked.insert(parse_stage(item));
    start = comma + 1;
  }
  if (picked.empty()) throw ConfigError("no stages selected");
  return {picked.begin(), picked.end()};
}

// --- config -------------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty()) return p;
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown " + std::string(where) + " key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const Json& j, std::string_view key, T& out) {
  auto it = j.find(key);
  if (it != j.end()) out = it->template get<T>();
}

void read_path(const Json& j, std::string_view key, const fs::path& base, fs::path& out) {
  auto it = j.find(key);
  if (it != j.end()) out = resolve(base, it->get<std::string>());
}

void require_dir(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ConfigError(std::string(what) + " is not configured");
  if (!fs::is_directory(p)) throw ConfigError(std::string(what) + " '" + p.string() + "' is not a directory");
}

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ConfigError(std::string(what) + " is not configured");
  if (!fs::is_regular_file(p)) throw ConfigError(std::string(what) + " '" + p.string() + "' does not exist");
}

bool wants(const std::vector<Stage>& stages, Stage s) {
  return std::find(stages.begin(), stages.end(), s) != stages.end();
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const Json& j, const fs::path& base) {
  PipelineConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"clusters_dir", "predictions_dir", "lexicon", "ideology_keywords", "templates_dir",
                    "cache_dir", "output_dir", "example", "encoder_checkpoint", "model_service",
                    "prompt_kinds", "templates", "endpoint", "encoder", "scoring", "threshold",
                    "strict_neus", "parallelism"},
                   "config");
    read_path(j, "clusters_dir", base, c.clusters_dir);
    read_path(j, "predictions_dir", base, c.predictions_dir);
    read_path(j, "lexicon", base, c.lexicon);
    read_path(j, "ideology_keywords", base, c.ideology_keywords);
    read_path(j, "templates_dir", base, c.templates_dir);
    read_path(j, "cache_dir", base, c.cache_dir);
    read_path(j, "output_dir", base, c.output_dir);
    read_path(j, "example", base, c.example);
    read_path(j, "encoder_checkpoint", base, c.encoder_checkpoint);
    read_opt(j, "strict_neus", c.strict_neus);
    read_opt(j, "parallelism", c.parallelism);

    if (auto it = j.find("model_service"); it != j.end()) {
      reject_unknown(*it, {"url", "timeout_s"}, "model_service");
      read_opt(*it, "url", c.model_service_url);
      read_opt(*it, "timeout_s", c.model_service_timeout_s);
    }
    if (auto it = j.find("prompt_kinds"); it != j.end()) {
      c.prompt_kinds.clear();
      for (const Json& k : *it) {
        const PromptKind kind = parse_prompt_kind(k.get<std::string>());
        if (std::find(c.prompt_kinds.begin(), c.prompt_kinds.end(), kind) == c.prompt_kinds.end()) {
          c.prompt_kinds.push_back(kind);
        }
      }
    }
    if (auto it = j.find("templates"); it != j.end()) {
      for (const auto& [kind, file] : it->items()) {
        c.template_files[parse_prompt_kind(kind)] = file.get<std::string>();
      }
    }
    if (auto it = j.find("endpoint"); it != j.end()) {
      EndpointSettings& e = c.endpoint;
      reject_unknown(*it,
                     {"type", "mock_responses", "base_url", "path", "api_key_env", "timeout_s",
                      "model_id", "max_input_tokens", "max_output_tokens", "temperature",
                      "max_attempts", "initial_backoff_ms"},
                     "endpoint");
      read_opt(*it, "type", e.type);
      read_path(*it, "mock_responses", base, e.mock_responses);
      read_opt(*it, "base_url", e.base_url);
      read_opt(*it, "path", e.path);
      read_opt(*it, "api_key_env", e.api_key_env);
      read_opt(*it, "timeout_s", e.timeout_s);
      read_opt(*it, "model_id", e.model_id);
      read_opt(*it, "max_input_tokens", e.max_input_tokens);
      read_opt(*it, "max_output_tokens", e.max_output_tokens);
      read_opt(*it, "temperature", e.temperature);
      read_opt(*it, "max_attempts", e.max_attempts);
      read_opt(*it, "initial_backoff_ms", e.initial_backoff_ms);
    }
    if (auto it = j.find("encoder"); it != j.end()) {
      EncoderConfig& e = c.encoder;
      reject_unknown(*it,
                     {"d_node", "d_rel", "d_k", "n_layers", "d_hidden", "d_llm", "seed",
                      "scale_attention", "leaky_slope"},
                     "encoder");
      read_opt(*it, "d_node", e.d_node);
      read_opt(*it, "d_rel", e.d_rel);
      read_opt(*it, "d_k", e.d_k);
      read_opt(*it, "n_layers", e.n_layers);
      read_opt(*it, "d_hidden", e.d_hidden);
      read_opt(*it, "d_llm", e.d_llm);
      read_opt(*it, "seed", e.seed);
      read_opt(*it, "scale_attention", e.scale_attention);
      read_opt(*it, "leaky_slope", e.leaky_slope);
    }
    if (auto it = j.find("scoring"); it != j.end()) {
      reject_unknown(*it, {"positive_valence", "negative_valence", "bleu_smoothing", "bleu_epsilon"},
                     "scoring");
      read_opt(*it, "positive_valence", c.scoring.thresholds.positive_valence);
      read_opt(*it, "negative_valence", c.scoring.thresholds.negative_valence);
      read_opt(*it, "bleu_smoothing", c.scoring.bleu.smoothing);
      read_opt(*it, "bleu_epsilon", c.scoring.bleu.epsilon);
    }
    if (auto it = j.find("threshold"); it != j.end()) {
      reject_unknown(*it, {"min_event_probability"}, "threshold");
      read_opt(*it, "min_event_probability", c.threshold.min_event_probability);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const SchemaError& e) {
    throw ConfigError(e.what());
  }

  if (c.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  c.encoder.check();
  if (c.endpoint.type != "mock" && c.endpoint.type != "http") {
    throw ConfigError("endpoint.type must be \"mock\" or \"http\"");
  }
  const ArousalThresholds& t = c.scoring.thresholds;
  if (!(0 <= t.negative_valence && t.negative_valence < t.positive_valence && t.positive_valence <= 1)) {
    throw ConfigError("valence thresholds need 0 <= negative < positive <= 1");
  }
  if (c.prompt_kinds.empty()) throw ConfigError("prompt_kinds is empty");
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  PipelineConfig c = from_json(j, fs::absolute(path).parent_path());
  c.config_path = fs::absolute(path).lexically_normal();
  return c;
}

void PipelineConfig::check(const std::vector<Stage>& stages) const {
  if (output_dir.empty()) throw ConfigError("output_dir is not configured");
  require_dir(clusters_dir, "clusters_dir");
  if (wants(stages, Stage::kIngest) && model_service_url.empty()) {
    require_dir(predictions_dir, "predictions_dir");
  }
  if (wants(stages, Stage::kTextualize)) {
    for (PromptKind k : prompt_kinds) {
      auto it = template_files.find(k);
      if (it == template_files.end()) {
        throw ConfigError("no template configured for prompt kind " + std::string(to_string(k)));
      }
      require_file(templates_dir / it->second, "template");
      if (uses_example(k)) require_file(example, "example");
    }
  }
  if (wants(stages, Stage::kEncode)) {
    encoder.check();
    if (!encoder_checkpoint.empty()) require_file(encoder_checkpoint, "encoder_checkpoint");
  }
  if (wants(stages, Stage::kSummarize)) {
    if (endpoint.type == "http" && endpoint.base_url.empty()) {
      throw ConfigError("endpoint.base_url is required for the http endpoint");
    }
    if (!endpoint.mock_responses.empty()) require_file(endpoint.mock_responses, "mock_responses");
    if (endpoint.max_input_tokens <= 0 || endpoint.max_output_tokens <= 0) {
      throw ConfigError("endpoint token budgets must be positive");
    }
  }
  if (wants(stages, Stage::kEvaluate)) {
    require_file(lexicon, "lexicon");
    if (model_service_url.empty()) require_file(ideology_keywords, "ideology_keywords");
  }
}

void to_json(Json& j, const ClusterRecord& c) {
  Json docs = Json::array();
  for (const Document& d : c.documents) docs.push_back(d);
  j = Json{{"cluster_id", c.cluster_id},
           {"documents", std::move(docs)},
           {"reference_summary", c.reference_summary}};
}

void from_json(const Json& j, ClusterRecord& c) {
  j.at("cluster_id").get_to(c.cluster_id);
  j.at("reference_summary").get_to(c.reference_summary);
  c.documents.clear();
  for (Json d : j.at("documents")) {
    if (!d.contains("token_spans")) {
      d["token_spans"] = Json::array();
      for (const CharSpan& s : word_spans(d.at("text").get<std::string>())) d["token_spans"].push_back(s);
    }
    c.documents.push_back(d.get<Document>());
  }
  if (c.cluster_id.empty()) throw SchemaError("cluster_id is empty");
  if (c.documents.empty()) throw SchemaError("cluster " + c.cluster_id + " has no documents");
}

// --- artifacts ----------------------------------------------------------------

fs::path ArtifactPaths::cluster_dir(const std::string& id) const { return root / "clusters" / id; }
fs::path ArtifactPaths::ingest(const std::string& id) const { return cluster_dir(id) / "ingest.json"; }
fs::path ArtifactPaths::graph(const std::string& id) const { return cluster_dir(id) / "graph.json"; }
fs::path ArtifactPaths::stats(const std::string& id) const { return cluster_dir(id) / "stats.json"; }
fs::path ArtifactPaths::tables(const std::string& id) const { return cluster_dir(id) / "tables.txt"; }
fs::path ArtifactPaths::prompt(const std::string& id, PromptKind k) const {
  return cluster_dir(id) / "prompts" / (std::string(to_string(k)) + ".json");
}
fs::path ArtifactPaths::prompt_text(const std::string& id, PromptKind k) const {
  return cluster_dir(id) / "prompts" / (std::string(to_string(k)) + ".txt");
}
fs::path ArtifactPaths::soft_prompt(const std::string& id) const {
  return cluster_dir(id) / "soft_prompt.json";
}
fs::path ArtifactPaths::summary(const std::string& id, PromptKind k) const {
  return cluster_dir(id) / "summaries" / (std::string(to_string(k)) + ".json");
}
fs::path ArtifactPaths::scores(const std::string& id) const { return cluster_dir(id) / "scores.json"; }
fs::path ArtifactPaths::encoder_checkpoint() const { return root / "encoder_checkpoint.json"; }
fs::path ArtifactPaths::report_json() const { return root / "report.json"; }
fs::path ArtifactPaths::report_markdown() const { return root / "report.md"; }

// --- stages -------------------------------------------------------------------

namespace {

// Inputs that other stages produce, with the producing stage for messages.
struct Input {
  fs::path path;
  std::optional<Stage> producer;
};

void require_inputs(Stage stage, const std::vector<Input>& inputs) {
  for (const Input& in : inputs) {
    if (fs::exists(in.path)) continue;
    std::string msg = std::string(to_string(stage)) + ": missing " + in.path.string();
    if (in.producer) msg += " (run the " + std::string(to_string(*in.producer)) + " stage first)";
    throw DependencyError(msg);
  }
}

bool up_to_date(const std::vector<Input>& inputs, const std::vector<fs::path>& outputs) {
  fs::file_time_type newest_input = fs::file_time_type::min();
  for (const Input& in : inputs) newest_input = std::max(newest_input, fs::last_write_time(in.path));
  for (const fs::path& out : outputs) {
    if (!fs::exists(out) || fs::last_write_time(out) < newest_input) return false;
  }
  return true;
}

void write_if_changed(const fs::path& path, const std::string& content) {
  if (fs::exists(path) && read_text_file(path) == content) return;
  write_text_file(path, content);
}

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.begin(), v.end())); }

struct IngestArtifact {
  ClusterRecord cluster;
  std::vector<DocumentPredictions> predictions;
  CrossDocPredictions crossdoc;
};

IngestArtifact read_ingest(const fs::path& path) {
  const Json j = read_json_file(path);
  IngestArtifact a;
  a.cluster = json_as<ClusterRecord>(j.at("cluster"), path.string());
  a.predictions = json_as<std::vector<DocumentPredictions>>(j.at("predictions"), path.string());
  a.crossdoc = json_as<CrossDocPredictions>(j.at("crossdoc"), path.string());
  return a;
}

std::string violations_text(const ValidationResult& v) {
  std::string out;
  for (const Violation& x : v.violations) out += "\n  " + x.element + ": " + x.rule;
  return out;
}

// Re-throws the active exception with a cluster prefix, keeping the category
// that decides the exit code.
[[noreturn]] void rethrow_with_context(const std::string& prefix) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DependencyError& e) {
    throw DependencyError(prefix + e.what());
  } catch (const RemoteError& e) {
    throw RemoteError(e.kind(), prefix + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(prefix + e.what());
  } catch (const std::exception& e) {
    throw Error(prefix + e.what());
  }
}

struct Shared {
  Shared(const PipelineConfig& c, const ArtifactPaths& p) : cfg(c), paths(p) {}

  const PipelineConfig& cfg;
  const ArtifactPaths& paths;
  bool force = false;
  std::vector<Input> config_inputs;  // files every stage depends on
  std::unique_ptr<ModelServiceClient> service;
  std::unique_ptr<CompletionEndpoint> endpoint;
  std::unique_ptr<SummarizerClient> client;
  std::optional<Checkpoint> encoder;
  std::optional<VadLexicon> lexicon;
  std::optional<KeywordIdeologyScorer> keywords;
  std::map<PromptKind, PromptTemplate> templates;
  std::optional<PromptExample> example;
};

class ClusterJob {
 public:
  ClusterJob(Shared& sh, fs::path cluster_file, std::string cluster_id)
      : sh_(sh), file_(std::move(cluster_file)), id_(std::move(cluster_id)) {}

  StageStatus run(Stage stage) {
    switch (stage) {
      case Stage::kIngest: return ingest();
      case Stage::kBuild: return build();
      case Stage::kTextualize: return textualize();
      case Stage::kEncode: return encode();
      case Stage::kSummarize: return summarize();
      case Stage::kEvaluate: return evaluate();
      case Stage::kReport: break;
    }
    throw Error("report is not a per-cluster stage");
  }

 private:
  std::vector<Input> with_config(std::vector<Input> inputs) const {
    inputs.insert(inputs.end(), sh_.config_inputs.begin(), sh_.config_inputs.end());
    return inputs;
  }

  bool cached(Stage stage, const std::vector<Input>& inputs, const std::vector<fs::path>& outputs) {
    require_inputs(stage, inputs);
    return !sh_.force && up_to_date(inputs, outputs);
  }

  StageStatus ingest() {
    const ClusterRecord cluster = json_as<ClusterRecord>(read_json_file(file_), file_.string());
    std::vector<Input> inputs = with_config({{file_, std::nullopt}});
    const fs::path pred_dir = sh_.cfg.predictions_dir / id_;
    if (!sh_.service) {
      for (const Document& d : cluster.documents) inputs.push_back({pred_dir / (d.doc_id + ".json"), {}});
      inputs.push_back({pred_dir / "crossdoc.json", {}});
    }
    const fs::path out = sh_.paths.ingest(id_);
    if (cached(Stage::kIngest, inputs, {out})) return StageStatus::kCached;

    IngestArtifact a;
    a.cluster = cluster;
    if (sh_.service) {
      ClusterPredictions p = sh_.service->predict_cluster(id_, cluster.documents, sh_.cfg.threshold);
      a.predictions = std::move(p.documents);
      a.crossdoc = std::move(p.crossdoc);
    } else {
      for (const Document& d : cluster.documents) {
        const fs::path f = pred_dir / (d.doc_id + ".json");
        a.predictions.push_back(json_as<DocumentPredictions>(read_json_file(f), f.string()));
        if (a.predictions.back().doc_id != d.doc_id) {
          throw SchemaError(f.string() + ": doc_id '" + a.predictions.back().doc_id +
                            "' does not match '" + d.doc_id + "'");
        }
      }
      const fs::path f = pred_dir / "crossdoc.json";
      a.crossdoc = json_as<CrossDocPredictions>(read_json_file(f), f.string());
    }
    if (a.crossdoc.cluster_id != id_) {
      throw SchemaError("cross-document predictions name cluster '" + a.crossdoc.cluster_id + "'");
    }
    Json preds = Json::array();
    for (const auto& p : a.predictions) preds.push_back(p);
    write_json_file(out, Json{{"cluster", a.cluster}, {"predictions", preds}, {"crossdoc", a.crossdoc}});
    return StageStatus::kDone;
  }

  StageStatus build() {
    const std::vector<Input> inputs = with_config({{sh_.paths.ingest(id_), Stage::kIngest}});
    const std::vector<fs::path> outputs{sh_.paths.graph(id_), sh_.paths.stats(id_)};
    if (cached(Stage::kBuild, inputs, outputs)) return StageStatus::kCached;

    const IngestArtifact a = read_ingest(sh_.paths.ingest(id_));
    const MultiDocGraph decoded =
        ingest_cluster(id_, a.cluster.documents, a.predictions, sh_.cfg.threshold);
    const MultiDocGraph graph = attach_crossdoc(decoded, a.crossdoc.clusters);
    const ValidationResult v = validate(graph, {.strict_neus = sh_.cfg.strict_neus});
    if (!v.ok()) throw SchemaError("graph failed validation:" + violations_text(v));

    const EventSplit split = common_vs_unique_events(graph);
    write_json_file(outputs[0], graph_to_json(graph));
    write_json_file(outputs[1], Json{{"cluster_id", id_},
                                     {"stats", compute_stats(graph)},
                                     {"common_events", split.common},
                                     {"unique_events", split.unique_per_doc}});
    return StageStatus::kDone;
  }

  StageStatus textualize() {
    std::vector<Input> inputs = with_config(
        {{sh_.paths.graph(id_), Stage::kBuild}, {sh_.paths.ingest(id_), Stage::kIngest}});
    std::vector<fs::path> outputs{sh_.paths.tables(id_)};
    for (PromptKind k : sh_.cfg.prompt_kinds) {
      inputs.push_back({sh_.cfg.templates_dir / sh_.cfg.template_files.at(k), {}});
      if (uses_example(k)) inputs.push_back({sh_.cfg.example, {}});
      outputs.push_back(sh_.paths.prompt(id_, k));
      outputs.push_back(sh_.paths.prompt_text(id_, k));
    }
    if (cached(Stage::kTextualize, inputs, outputs)) return StageStatus::kCached;

    const MultiDocGraph graph = graph_from_json(read_json_file(sh_.paths.graph(id_)));
    const IngestArtifact a = read_ingest(sh_.paths.ingest(id_));
    const GraphTables tables = tabulate(graph);
    ClusterInput input{id_, {}, tables};
    for (const Document& d : a.cluster.documents) input.articles.push_back(d.text);
    const EndpointSettings& e = sh_.cfg.endpoint;
    const Budget budget{e.model_id, e.max_input_tokens, e.max_output_tokens, e.temperature};

    write_text_file(sh_.paths.tables(id_), render_tables(tables));
    for (PromptKind k : sh_.cfg.prompt_kinds) {
      const LlmRequest req = build_request(input, k, sh_.templates.at(k), budget,
                                           sh_.example ? &*sh_.example : nullptr);
      write_json_file(sh_.paths.prompt(id_, k), req);
      write_text_file(sh_.paths.prompt_text(id_, k), req.prompt + "\n");
    }
    return StageStatus::kDone;
  }

  StageStatus encode() {
    std::vector<Input> inputs = with_config({{sh_.paths.graph(id_), Stage::kBuild}});
    if (!sh_.cfg.encoder_checkpoint.empty()) inputs.push_back({sh_.cfg.encoder_checkpoint, {}});
    const fs::path out = sh_.paths.soft_prompt(id_);
    if (cached(Stage::kEncode, inputs, {out})) return StageStatus::kCached;

    const MultiDocGraph graph = graph_from_json(read_json_file(sh_.paths.graph(id_)));
    const EncoderConfig& config = sh_.encoder->config;
    const ForwardResult fw = forward(make_encoder_graph(graph), hash_node_init(graph, config.d_node),
                                     sh_.encoder->params, config);
    Json node_attention = Json::array();
    for (const Eigen::VectorXd& beta : fw.node_attention) node_attention.push_back(vector_json(beta));
    write_json_file(out, Json{{"cluster_id", id_},
                              {"encoder", config},
                              {"graph_embedding", vector_json(fw.graph_embedding)},
                              {"soft_prompt", vector_json(fw.soft_prompt)},
                              {"node_attention", std::move(node_attention)}});
    return StageStatus::kDone;
  }

  StageStatus summarize() {
    std::vector<Input> inputs = with_config({});
    if (!sh_.cfg.endpoint.mock_responses.empty()) inputs.push_back({sh_.cfg.endpoint.mock_responses, {}});
    std::vector<fs::path> outputs;
    for (PromptKind k : sh_.cfg.prompt_kinds) {
      inputs.push_back({sh_.paths.prompt(id_, k), Stage::kTextualize});
      outputs.push_back(sh_.paths.summary(id_, k));
    }
    if (cached(Stage::kSummarize, inputs, outputs)) return StageStatus::kCached;

    for (PromptKind k : sh_.cfg.prompt_kinds) {
      const fs::path p = sh_.paths.prompt(id_, k);
      const LlmRequest req = json_as<LlmRequest>(read_json_file(p), p.string());
      SummaryRecord rec = sh_.client->summarize(req, id_);
      write_json_file(sh_.paths.summary(id_, k), rec);
    }
    return StageStatus::kDone;
  }

  StageStatus evaluate() {
    std::vector<Input> inputs = with_config({{sh_.paths.ingest(id_), Stage::kIngest},
                                             {sh_.cfg.lexicon, {}}});
    if (!sh_.service) inputs.push_back({sh_.cfg.ideology_keywords, {}});
    for (PromptKind k : sh_.cfg.prompt_kinds) {
      inputs.push_back({sh_.paths.summary(id_, k), Stage::kSummarize});
    }
    const fs::path out = sh_.paths.scores(id_);
    if (cached(Stage::kEvaluate, inputs, {out})) return StageStatus::kCached;

    const IngestArtifact a = read_ingest(sh_.paths.ingest(id_));
    Json rows = Json::array();
    Json ideology = Json::object();
    for (PromptKind k : sh_.cfg.prompt_kinds) {
      const fs::path p = sh_.paths.summary(id_, k);
      const SummaryRecord rec = json_as<SummaryRecord>(read_json_file(p), p.string());
      const IdeologyProbs probs = sh_.service ? sh_.service->classify_ideology(rec.summary_text)
                                              : sh_.keywords->score(rec.summary_text);
      EvalRow row{id_, std::string(to_string(k)),
                  score_summary(rec.summary_text, a.cluster.reference_summary, *sh_.lexicon, probs,
                                sh_.cfg.scoring)};
      rows.push_back(row);
      ideology[std::string(to_string(k))] = probs;
    }
    write_json_file(out, Json{{"cluster_id", id_}, {"rows", std::move(rows)}, {"ideology", ideology}});
    return StageStatus::kDone;
  }

  Shared& sh_;
  fs::path file_;
  std::string id_;
};

}  // namespace

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  paths_.root = config_.output_dir;
}

std::vector<fs::path> Pipeline::cluster_files() const {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(config_.clusters_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<StageOutcome> Pipeline::run(const RunOptions& options) {
  const std::vector<Stage>& stages = options.stages;
  config_.check(stages);

  Shared sh(config_, paths_);
  sh.force = options.force;
  if (!config_.config_path.empty()) sh.config_inputs.push_back({config_.config_path, {}});
  if (!config_.model_service_url.empty() && (wants(stages, Stage::kIngest) || wants(stages, Stage::kEvaluate))) {
    sh.service = std::make_unique<ModelServiceClient>(config_.model_service_url,
                                                      config_.model_service_timeout_s);
  }
  if (wants(stages, Stage::kTextualize)) {
    for (PromptKind k : config_.prompt_kinds) {
      sh.templates.emplace(k, PromptTemplate::load(config_.templates_dir / config_.template_files.at(k)));
      if (uses_example(k) && !sh.example) {
        sh.example = json_as<PromptExample>(read_json_file(config_.example), config_.example.string());
      }
    }
  }
  if (wants(stages, Stage::kEncode)) {
    if (config_.encoder_checkpoint.empty()) {
      sh.encoder = Checkpoint{config_.encoder, EncoderParams::glorot(config_.encoder)};
    } else {
      sh.encoder = load_checkpoint(config_.encoder_checkpoint);
    }
    const fs::path tmp = paths_.encoder_checkpoint().string() + ".new";
    save_checkpoint(tmp, sh.encoder->config, sh.encoder->params);
    write_if_changed(paths_.encoder_checkpoint(), read_text_file(tmp));
    fs::remove(tmp);
  }
  if (wants(stages, Stage::kSummarize)) {
    const EndpointSettings& e = config_.endpoint;
    if (e.type == "http") {
      const char* key = e.api_key_env.empty() ? nullptr : std::getenv(e.api_key_env.c_str());
      sh.endpoint = std::make_unique<HttpEndpoint>(
          HttpEndpointConfig{e.base_url, e.path, key != nullptr ? key : "", e.timeout_s});
    } else if (!e.mock_responses.empty()) {
      sh.endpoint = std::make_unique<MockEndpoint>(MockEndpoint::load_rules(e.mock_responses));
    } else {
      sh.endpoint = std::make_unique<MockEndpoint>();
    }
    ClientOptions opts;
    opts.cache_dir = config_.cache_dir;
    opts.max_attempts = e.max_attempts;
    opts.initial_backoff = std::chrono::milliseconds(e.initial_backoff_ms);
    sh.client = std::make_unique<SummarizerClient>(*sh.endpoint, std::move(opts));
  }
  if (wants(stages, Stage::kEvaluate)) {
    sh.lexicon = VadLexicon::load(config_.lexicon);
    if (!sh.service) sh.keywords = KeywordIdeologyScorer::load(config_.ideology_keywords);
  }

  // Cluster ids come from the files so every stage sees the same set.
  std::vector<std::pair<fs::path, std::string>> clusters;
  std::set<std::string> seen;
  for (const fs::path& f : cluster_files()) {
    std::string id;
    try {
      id = read_json_file(f).at("cluster_id").get<std::string>();
    } catch (const Json::exception& e) {
      throw SchemaError(f.string() + ": " + e.what());
    }
    if (!seen.insert(id).second) throw SchemaError("duplicate cluster_id '" + id + "'");
    clusters.emplace_back(f, id);
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });

  std::vector<StageOutcome> outcomes;
  std::mutex mu;
  auto record = [&](StageOutcome o) {
    const std::lock_guard lock(mu);
    if (options.on_outcome) options.on_outcome(o);
    outcomes.push_back(std::move(o));
  };

  std::vector<std::exception_ptr> errors(clusters.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < clusters.size(); i = next++) {
      const auto& [file, id] = clusters[i];
      ClusterJob job(sh, file, id);
      try {
        for (Stage s : stages) {
          if (s == Stage::kReport) continue;
          try {
            record({s, id, job.run(s)});
          } catch (...) {
            rethrow_with_context("cluster " + id + ": ");
          }
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(config_.parallelism), clusters.size());
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (wants(stages, Stage::kReport)) {
    std::vector<Input> inputs = sh.config_inputs;
    for (const auto& [_, id] : clusters) inputs.push_back({paths_.scores(id), Stage::kEvaluate});
    if (clusters.empty()) throw SchemaError("report: no clusters found in " + config_.clusters_dir.string());
    require_inputs(Stage::kReport, inputs);
    const std::vector<fs::path> outputs{paths_.report_json(), paths_.report_markdown()};
    if (!options.force && up_to_date(inputs, outputs)) {
      record({Stage::kReport, "", StageStatus::kCached});
    } else {
      std::vector<EvalRow> rows;
      for (const auto& [_, id] : clusters) {
        const fs::path p = paths_.scores(id);
        const Json j = read_json_file(p);
        for (const Json& r : j.at("rows")) rows.push_back(json_as<EvalRow>(r, p.string()));
      }
      const EvalReport report = make_report(std::move(rows));
      write_json_file(outputs[0], report);
      write_text_file(outputs[1], report_markdown(report));
      record({Stage::kReport, "", StageStatus::kDone});
    }
  }

  std::stable_sort(outcomes.begin(), outcomes.end(), [](const StageOutcome& a, const StageOutcome& b) {
    if (a.cluster_id.empty() != b.cluster_id.empty()) return b.cluster_id.empty();
    if (a.cluster_id != b.cluster_id) return a.cluster_id < b.cluster_id;
    return a.stage < b.stage;
  });
  return outcomes;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const DependencyError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const RemoteError*>(&e) != nullptr) return 4;
  return 1;
}

}  // namespace neutralsum
