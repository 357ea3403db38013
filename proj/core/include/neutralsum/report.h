#pragma once

#include <string>
#include <vector>

#include "neutralsum/json_io.h"
#include "neutralsum/metrics.h"

namespace neutralsum {

struct EvalRow {
  std::string cluster_id;
  std::string prompt_kind;
  SummaryScores scores;
};

struct EvalMean {
  std::string prompt_kind;
  std::size_t n = 0;
  SummaryScores scores;
};

// Per-summary rows plus one mean row per prompt kind, in order of first
// appearance.
struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalMean> means;
};

void to_json(Json& j, const ArousalScores& s);
void from_json(const Json& j, ArousalScores& s);
void to_json(Json& j, const SummaryScores& s);
void from_json(const Json& j, SummaryScores& s);
void to_json(Json& j, const EvalRow& r);
void from_json(const Json& j, EvalRow& r);
void to_json(Json& j, const EvalMean& m);
void from_json(const Json& j, EvalMean& m);
void to_json(Json& j, const EvalReport& r);
void from_json(const Json& j, EvalReport& r);

// Throws SchemaError when rows is empty.
EvalReport make_report(std::vector<EvalRow> rows);

// Content columns (Rouge-1/2/L/Lsum, BLEU-2) then bias columns (polarization,
// p/n/sum-arousal). Rouge, BLEU and polarization are scaled by 100; all
// values use two decimals.
std::string report_markdown(const EvalReport& report);

}  // namespace neutralsum
