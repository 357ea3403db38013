#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neutralsum/graph.h"
#include "neutralsum/prompt_template.h"

namespace neutralsum {

struct EventRow {
  std::string event_id;
  std::string event_text;
  std::string moral_attribute;

  bool operator==(const EventRow&) const = default;
};

struct RelationRow {
  std::string source_id;
  std::string source_text;
  std::string relation_word;
  std::string target_id;
  std::string target_text;

  bool operator==(const RelationRow&) const = default;
};

struct GraphTables {
  std::vector<EventRow> event_rows;
  std::vector<RelationRow> relation_rows;

  bool operator==(const GraphTables&) const = default;
};

inline constexpr std::string_view kEventTableHeader =
    "| event id | event word | event moral attribute |";
inline constexpr std::string_view kRelationTableHeader =
    "| source event id | source event word | relation | target event id | target event word |";
inline constexpr std::string_view kArticleSeparator = " /s ";

// "objective" for non_moral, otherwise the lowercase label name.
std::string_view moral_attribute(MoralLabel label);

// Event rows follow the graph's event order (documents by doc_id, then
// offset); relation rows are ordered by (source id, label, target id).
GraphTables tabulate(const MultiDocGraph& graph);

// Pipe-delimited table: header line then one line per row, joined with '\n'.
// Backslash, '|', CR and LF inside cells are backslash-escaped.
std::string render_event_table(const GraphTables& tables);
std::string render_relation_table(const GraphTables& tables);
// Both tables separated by a blank line, newline terminated.
std::string render_tables(const GraphTables& tables);

std::string join_articles(std::span<const std::string> articles);

// Fills {event table}, {event relation table}, {article k} and {articles};
// `extra` supplies any further placeholders (one-shot examples). Each table
// is surrounded by newlines so its lines start at column 0.
std::string render_hard_prompt(const GraphTables& tables, std::span<const std::string> articles,
                               const PromptTemplate& tmpl, const PlaceholderValues& extra = {});

// Recovers the tables from render_hard_prompt or render_tables output.
// Throws ParseError with the offending 1-based line number.
GraphTables parse_tables(std::string_view prompt_text);

}  // namespace neutralsum
