#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "neutralsum/encoder.h"
#include "neutralsum/graph.h"
#include "neutralsum/ingestion.h"
#include "neutralsum/json_io.h"
#include "neutralsum/metrics.h"
#include "neutralsum/summarizer.h"

namespace neutralsum {

enum class Stage { kIngest, kBuild, kTextualize, kEncode, kSummarize, kEvaluate, kReport };

inline constexpr Stage kAllStages[] = {Stage::kIngest,    Stage::kBuild,    Stage::kTextualize,
                                       Stage::kEncode,    Stage::kSummarize, Stage::kEvaluate,
                                       Stage::kReport};

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view s);  // throws ConfigError
// Comma-separated list; the result is in pipeline order without duplicates.
std::vector<Stage> parse_stages(std::string_view list);

struct EndpointSettings {
  std::string type = "mock";  // "mock" or "http"
  std::filesystem::path mock_responses;  // optional rules file for "mock"
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_s = 60.0;
  std::string model_id = "mock-summarizer";
  int max_input_tokens = 2048;
  int max_output_tokens = 512;
  double temperature = 0.0;
  int max_attempts = 3;
  int initial_backoff_ms = 250;
};

struct PipelineConfig {
  std::filesystem::path config_path;  // set by load()
  std::filesystem::path clusters_dir;
  std::filesystem::path predictions_dir;
  std::filesystem::path lexicon;
  std::filesystem::path ideology_keywords;
  std::filesystem::path templates_dir;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;
  std::filesystem::path example;             // one-shot / chain-of-thought demonstration
  std::filesystem::path encoder_checkpoint;  // optional; fresh Glorot weights otherwise
  std::string model_service_url;             // replaces prediction files and keywords when set
  double model_service_timeout_s = 30.0;
  std::vector<PromptKind> prompt_kinds{PromptKind::kBaseline, PromptKind::kGraph};
  std::map<PromptKind, std::string> template_files{{PromptKind::kBaseline, "baseline.txt"},
                                                   {PromptKind::kGraph, "graph.txt"},
                                                   {PromptKind::kOneShot, "gpt_one_shot.txt"},
                                                   {PromptKind::kCotGraph, "gpt_cot_graph.txt"}};
  EndpointSettings endpoint;
  EncoderConfig encoder;
  ScoringOptions scoring;
  ThresholdPolicy threshold;
  bool strict_neus = false;
  int parallelism = 4;

  // JSON document; relative paths resolve against the file's directory.
  // Unknown keys and malformed values raise ConfigError.
  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig from_json(const Json& j, const std::filesystem::path& base_dir);

  // Throws ConfigError when an input the given stages read is missing.
  void check(const std::vector<Stage>& stages) const;
};

// One input cluster: articles in dataset order and the reference summary.
struct ClusterRecord {
  std::string cluster_id;
  std::vector<Document> documents;
  std::string reference_summary;
};

void to_json(Json& j, const ClusterRecord& c);
// Fills token_spans from the text when absent.
void from_json(const Json& j, ClusterRecord& c);

enum class StageStatus { kDone, kCached };

struct StageOutcome {
  Stage stage = Stage::kIngest;
  std::string cluster_id;  // empty for the corpus-level report stage
  StageStatus status = StageStatus::kDone;
};

struct RunOptions {
  std::vector<Stage> stages{std::begin(kAllStages), std::end(kAllStages)};
  bool force = false;
  std::function<void(const StageOutcome&)> on_outcome;  // called as stages finish
};

// Artifact locations under output_dir.
struct ArtifactPaths {
  std::filesystem::path root;

  std::filesystem::path cluster_dir(const std::string& cluster_id) const;
  std::filesystem::path ingest(const std::string& cluster_id) const;
  std::filesystem::path graph(const std::string& cluster_id) const;
  std::filesystem::path stats(const std::string& cluster_id) const;
  std::filesystem::path tables(const std::string& cluster_id) const;
  std::filesystem::path prompt(const std::string& cluster_id, PromptKind kind) const;
  std::filesystem::path prompt_text(const std::string& cluster_id, PromptKind kind) const;
  std::filesystem::path soft_prompt(const std::string& cluster_id) const;
  std::filesystem::path summary(const std::string& cluster_id, PromptKind kind) const;
  std::filesystem::path scores(const std::string& cluster_id) const;
  std::filesystem::path encoder_checkpoint() const;
  std::filesystem::path report_json() const;
  std::filesystem::path report_markdown() const;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  // Runs the stages for every cluster in clusters_dir (sorted by cluster_id)
  // with at most config.parallelism clusters in flight, then the report.
  // A stage whose outputs are newer than all of its inputs is skipped and
  // reported as cached unless options.force is set. Errors carry the cluster
  // id; a missing upstream artifact raises DependencyError.
  std::vector<StageOutcome> run(const RunOptions& options);

  const PipelineConfig& config() const { return config_; }
  const ArtifactPaths& paths() const { return paths_; }
  std::vector<std::filesystem::path> cluster_files() const;

 private:
  PipelineConfig config_;
  ArtifactPaths paths_;
};

// Process exit status for an exception thrown by the pipeline:
// 2 config, 3 dependency, 4 remote service, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace neutralsum
