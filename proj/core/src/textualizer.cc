#include "neutralsum/textualizer.h"

#include <algorithm>

#include "neutralsum/error.h"

namespace neutralsum {
namespace {

std::string escape_cell(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '|': out += "\\|"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string render_row(std::initializer_list<std::string_view> cells) {
  std::string line = "|";
  for (std::string_view cell : cells) {
    line += ' ';
    line += escape_cell(cell);
    line += " |";
  }
  return line;
}

// Splits "| a | b |" into unescaped cells.
std::vector<std::string> split_row(std::string_view line, std::size_t line_no) {
  if (line.size() < 2 || line.front() != '|' || line.back() != '|') {
    throw ParseError(line_no, "table row must start and end with '|'");
  }
  std::vector<std::string> raw_cells;
  std::string current;
  bool closed = true;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const char c = line[i];
    closed = false;
    if (c == '\\') {
      if (i + 1 >= line.size()) throw ParseError(line_no, "dangling escape");
      current.push_back(c);
      current.push_back(line[++i]);
    } else if (c == '|') {
      raw_cells.push_back(std::move(current));
      current.clear();
      closed = true;
    } else {
      current.push_back(c);
    }
  }
  if (!closed) throw ParseError(line_no, "table row must end with an unescaped '|'");

  std::vector<std::string> cells;
  cells.reserve(raw_cells.size());
  for (const std::string& raw : raw_cells) {
    if (raw.size() < 2 || raw.front() != ' ' || raw.back() != ' ') {
      throw ParseError(line_no, "table cell must be padded by single spaces");
    }
    std::string cell;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] != '\\') {
        cell.push_back(raw[i]);
        continue;
      }
      switch (raw[++i]) {
        case '\\': cell.push_back('\\'); break;
        case '|': cell.push_back('|'); break;
        case 'n': cell.push_back('\n'); break;
        case 'r': cell.push_back('\r'); break;
        default: throw ParseError(line_no, "unknown escape sequence");
      }
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

struct Line {
  std::string_view text;
  std::size_t number;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t start = 0;
  std::size_t number = 1;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back({text.substr(start, end - start), number++});
    start = end + 1;
  }
  return lines;
}

// Returns the index one past the last row of the table whose header sits at
// lines[header], appending each row's cells to `rows`.
std::size_t read_table(const std::vector<Line>& lines, std::size_t header, std::size_t n_columns,
                       std::vector<std::vector<std::string>>& rows) {
  std::size_t i = header + 1;
  for (; i < lines.size() && !lines[i].text.empty() && lines[i].text.front() == '|'; ++i) {
    if (lines[i].text == kRelationTableHeader) break;
    auto cells = split_row(lines[i].text, lines[i].number);
    if (cells.size() != n_columns) {
      throw ParseError(lines[i].number, "expected " + std::to_string(n_columns) + " cells, found " +
                                            std::to_string(cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  return i;
}

std::size_t find_line(const std::vector<Line>& lines, std::size_t from, std::string_view wanted) {
  for (std::size_t i = from; i < lines.size(); ++i) {
    if (lines[i].text == wanted) return i;
  }
  return lines.size();
}

bool is_moral_attribute(std::string_view s) {
  if (s == "objective") return true;
  for (std::size_t i = 0; i + 1 < kNumMoralLabels; ++i) {
    if (to_string(static_cast<MoralLabel>(i)) == s) return true;
  }
  return false;
}

}  // namespace

std::string_view moral_attribute(MoralLabel label) {
  return label == MoralLabel::kNonMoral ? std::string_view("objective") : to_string(label);
}

GraphTables tabulate(const MultiDocGraph& graph) {
  GraphTables tables;
  tables.event_rows.reserve(graph.events().size());
  for (const Event& ev : graph.events()) {
    tables.event_rows.push_back(
        {ev.event_id, ev.trigger_text, std::string(moral_attribute(ev.moral))});
  }
  // relations() is already sorted by (source, label, target).
  for (const EventRelation& r : graph.relations()) {
    const Event* src = graph.find_event(r.source);
    const Event* dst = graph.find_event(r.target);
    if (src == nullptr || dst == nullptr) continue;
    tables.relation_rows.push_back({r.source, src->trigger_text, std::string(surface_form(r.label)),
                                    r.target, dst->trigger_text});
  }
  return tables;
}

std::string render_event_table(const GraphTables& tables) {
  std::string out(kEventTableHeader);
  for (const EventRow& row : tables.event_rows) {
    out += '\n';
    out += render_row({row.event_id, row.event_text, row.moral_attribute});
  }
  return out;
}

std::string render_relation_table(const GraphTables& tables) {
  std::string out(kRelationTableHeader);
  for (const RelationRow& row : tables.relation_rows) {
    out += '\n';
    out += render_row(
        {row.source_id, row.source_text, row.relation_word, row.target_id, row.target_text});
  }
  return out;
}

std::string render_tables(const GraphTables& tables) {
  return render_event_table(tables) + "\n\n" + render_relation_table(tables) + "\n";
}

std::string join_articles(std::span<const std::string> articles) {
  std::string out;
  for (std::size_t k = 0; k < articles.size(); ++k) {
    if (k > 0) out += kArticleSeparator;
    out += normalize_newlines(articles[k]);
  }
  return out;
}

std::string render_hard_prompt(const GraphTables& tables, std::span<const std::string> articles,
                               const PromptTemplate& tmpl, const PlaceholderValues& extra) {
  PlaceholderValues values = extra;
  values.insert_or_assign(std::string(placeholder::kEventTable),
                          "\n" + render_event_table(tables) + "\n");
  values.insert_or_assign(std::string(placeholder::kRelationTable),
                          "\n" + render_relation_table(tables) + "\n");
  values.insert_or_assign(std::string(placeholder::kArticles), join_articles(articles));
  for (std::size_t k = 0; k < articles.size(); ++k) {
    values.insert_or_assign(placeholder::article(k + 1), normalize_newlines(articles[k]));
  }
  return tmpl.render(values);
}

GraphTables parse_tables(std::string_view prompt_text) {
  const std::vector<Line> lines = split_lines(prompt_text);
  GraphTables tables;

  const std::size_t ev_header = find_line(lines, 0, kEventTableHeader);
  if (ev_header == lines.size()) throw ParseError(1, "missing event table header");
  std::vector<std::vector<std::string>> rows;
  const std::size_t ev_end = read_table(lines, ev_header, 3, rows);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto& r = rows[k];
    if (!is_moral_attribute(r[2])) {
      throw ParseError(lines[ev_header + 1 + k].number, "unknown moral attribute '" + r[2] + "'");
    }
    tables.event_rows.push_back({std::move(r[0]), std::move(r[1]), std::move(r[2])});
  }

  const std::size_t rel_header = find_line(lines, ev_end, kRelationTableHeader);
  if (rel_header == lines.size()) {
    const std::size_t at = ev_end < lines.size() ? lines[ev_end].number : lines.back().number;
    throw ParseError(at, "missing relation table header");
  }
  rows.clear();
  read_table(lines, rel_header, 5, rows);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto& r = rows[k];
    try {
      parse_relation_surface_form(r[2]);
    } catch (const SchemaError&) {
      throw ParseError(lines[rel_header + 1 + k].number, "unknown relation word '" + r[2] + "'");
    }
    tables.relation_rows.push_back(
        {std::move(r[0]), std::move(r[1]), std::move(r[2]), std::move(r[3]), std::move(r[4])});
  }
  return tables;
}

}  // namespace neutralsum
