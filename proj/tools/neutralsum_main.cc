// neutralsum: runs the summarization pipeline stages over a cluster corpus.
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "neutralsum/pipeline.h"

namespace {

struct Flags {
  std::string config;
  std::string stages;
  bool force = false;
  int parallelism = 0;
  bool strict_neus = false;
};

void add_common(CLI::App* cmd, Flags& flags) {
  cmd->add_option("-c,--config", flags.config, "Pipeline config (JSON)")->required();
  cmd->add_flag("-f,--force", flags.force, "Recompute stages even when outputs are current");
  cmd->add_option("-j,--parallelism", flags.parallelism, "Clusters processed concurrently")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--strict-neus", flags.strict_neus,
                "Reject graphs outside the NeuS relation schema");
}

void print_outcome(const neutralsum::StageOutcome& o) {
  const char* status = o.status == neutralsum::StageStatus::kCached ? "cached" : "done";
  std::printf("%-10s %-24s %s\n", std::string(neutralsum::to_string(o.stage)).c_str(),
              o.cluster_id.empty() ? "*" : o.cluster_id.c_str(), status);
  std::fflush(stdout);
}

int execute(const Flags& flags, std::vector<neutralsum::Stage> stages) {
  try {
    neutralsum::PipelineConfig config = neutralsum::PipelineConfig::load(flags.config);
    if (flags.parallelism > 0) config.parallelism = flags.parallelism;
    if (flags.strict_neus) config.strict_neus = true;
    if (!flags.stages.empty()) stages = neutralsum::parse_stages(flags.stages);

    neutralsum::RunOptions options;
    options.stages = std::move(stages);
    options.force = flags.force;
    options.on_outcome = print_outcome;
    neutralsum::Pipeline pipeline(std::move(config));
    pipeline.run(options);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "neutralsum: %s\n", e.what());
    return neutralsum::exit_code_for(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-graph guided neutral summarization pipeline"};
  app.require_subcommand(1);

  Flags flags;
  struct Single {
    neutralsum::Stage stage;
    const char* help;
  };
  const Single singles[] = {
      {neutralsum::Stage::kIngest, "Load documents and model predictions"},
      {neutralsum::Stage::kBuild, "Decode and validate the multi-document event graph"},
      {neutralsum::Stage::kTextualize, "Render graph tables and prompts"},
      {neutralsum::Stage::kEncode, "Compute graph soft prompts with the attention encoder"},
      {neutralsum::Stage::kSummarize, "Query the summarization endpoint"},
      {neutralsum::Stage::kEvaluate, "Score summaries for content and bias"},
      {neutralsum::Stage::kReport, "Aggregate scores into report.json and report.md"},
  };
  int exit_code = 0;
  for (const Single& s : singles) {
    CLI::App* cmd = app.add_subcommand(std::string(neutralsum::to_string(s.stage)), s.help);
    add_common(cmd, flags);
    cmd->callback([&, stage = s.stage] { exit_code = execute(flags, {stage}); });
  }
  CLI::App* run = app.add_subcommand("run", "Run several stages in pipeline order (default: all)");
  add_common(run, flags);
  run->add_option("-s,--stages", flags.stages, "Comma-separated stage list");
  run->callback([&] {
    exit_code = execute(flags, {std::begin(neutralsum::kAllStages), std::end(neutralsum::kAllStages)});
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return exit_code;
}
