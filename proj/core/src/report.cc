#include "neutralsum/report.h"

#include <cstdio>

#include "neutralsum/error.h"

namespace neutralsum {
namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string markdown_cells(const SummaryScores& s) {
  std::string out;
  for (double v : {s.rouge1 * 100, s.rouge2 * 100, s.rougeL * 100, s.rougeLsum * 100,
                   s.bleu2 * 100, s.polarization * 100, s.arousal.p_arousal,
                   s.arousal.n_arousal, s.arousal.sum_arousal}) {
    out += " " + fixed2(v) + " |";
  }
  return out;
}

std::string escape_md(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

void to_json(Json& j, const ArousalScores& s) {
  j = Json{{"p_arousal", s.p_arousal}, {"n_arousal", s.n_arousal}, {"sum_arousal", s.sum_arousal}};
}

void from_json(const Json& j, ArousalScores& s) {
  j.at("p_arousal").get_to(s.p_arousal);
  j.at("n_arousal").get_to(s.n_arousal);
  j.at("sum_arousal").get_to(s.sum_arousal);
}

void to_json(Json& j, const SummaryScores& s) {
  j = Json{{"rouge1", s.rouge1},       {"rouge2", s.rouge2}, {"rougeL", s.rougeL},
           {"rougeLsum", s.rougeLsum}, {"bleu2", s.bleu2},   {"polarization", s.polarization},
           {"arousal", s.arousal}};
}

void from_json(const Json& j, SummaryScores& s) {
  j.at("rouge1").get_to(s.rouge1);
  j.at("rouge2").get_to(s.rouge2);
  j.at("rougeL").get_to(s.rougeL);
  j.at("rougeLsum").get_to(s.rougeLsum);
  j.at("bleu2").get_to(s.bleu2);
  j.at("polarization").get_to(s.polarization);
  j.at("arousal").get_to(s.arousal);
  for (double v : {s.rouge1, s.rouge2, s.rougeL, s.rougeLsum, s.bleu2, s.polarization}) {
    if (!(v >= 0 && v <= 1)) throw SchemaError("score outside [0, 1]");
  }
}

void to_json(Json& j, const EvalRow& r) {
  j = Json{{"cluster_id", r.cluster_id}, {"prompt_kind", r.prompt_kind}, {"scores", r.scores}};
}

void from_json(const Json& j, EvalRow& r) {
  j.at("cluster_id").get_to(r.cluster_id);
  j.at("prompt_kind").get_to(r.prompt_kind);
  j.at("scores").get_to(r.scores);
}

void to_json(Json& j, const EvalMean& m) {
  j = Json{{"prompt_kind", m.prompt_kind}, {"n", m.n}, {"scores", m.scores}};
}

void from_json(const Json& j, EvalMean& m) {
  j.at("prompt_kind").get_to(m.prompt_kind);
  j.at("n").get_to(m.n);
  j.at("scores").get_to(m.scores);
}

void to_json(Json& j, const EvalReport& r) { j = Json{{"rows", r.rows}, {"means", r.means}}; }

void from_json(const Json& j, EvalReport& r) {
  j.at("rows").get_to(r.rows);
  j.at("means").get_to(r.means);
}

EvalReport make_report(std::vector<EvalRow> rows) {
  if (rows.empty()) throw SchemaError("nothing to report: no scored summaries");
  EvalReport report;
  for (const EvalRow& row : rows) {
    EvalMean* mean = nullptr;
    for (EvalMean& m : report.means) {
      if (m.prompt_kind == row.prompt_kind) mean = &m;
    }
    if (mean == nullptr) mean = &report.means.emplace_back(EvalMean{row.prompt_kind, 0, {}});
    SummaryScores& acc = mean->scores;
    const SummaryScores& s = row.scores;
    acc.rouge1 += s.rouge1;
    acc.rouge2 += s.rouge2;
    acc.rougeL += s.rougeL;
    acc.rougeLsum += s.rougeLsum;
    acc.bleu2 += s.bleu2;
    acc.polarization += s.polarization;
    acc.arousal.p_arousal += s.arousal.p_arousal;
    acc.arousal.n_arousal += s.arousal.n_arousal;
    acc.arousal.sum_arousal += s.arousal.sum_arousal;
    ++mean->n;
  }
  for (EvalMean& m : report.means) {
    const double inv = 1.0 / static_cast<double>(m.n);
    SummaryScores& a = m.scores;
    for (double* v : {&a.rouge1, &a.rouge2, &a.rougeL, &a.rougeLsum, &a.bleu2, &a.polarization,
                      &a.arousal.p_arousal, &a.arousal.n_arousal, &a.arousal.sum_arousal}) {
      *v *= inv;
    }
  }
  report.rows = std::move(rows);
  return report;
}

std::string report_markdown(const EvalReport& report) {
  std::string out =
      "# Evaluation report\n"
      "\n"
      "Content evaluation: Rouge-1, Rouge-2, Rouge-L, Rouge-Lsum, BLEU-2 (x100, higher is "
      "better).\n"
      "Bias evaluation: polarization (x100), p-arousal, n-arousal, sum-arousal (lower is "
      "better).\n"
      "\n"
      "| Cluster | Prompt | Rouge-1 | Rouge-2 | Rouge-L | Rouge-Lsum | BLEU-2 | polarization | "
      "p-arousal | n-arousal | sum-arousal |\n"
      "|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const EvalRow& r : report.rows) {
    out += "| " + escape_md(r.cluster_id) + " | " + escape_md(r.prompt_kind) + " |" +
           markdown_cells(r.scores) + "\n";
  }
  for (const EvalMean& m : report.means) {
    out += "| mean (n=" + std::to_string(m.n) + ") | " + escape_md(m.prompt_kind) + " |" +
           markdown_cells(m.scores) + "\n";
  }
  return out;
}

}  // namespace neutralsum
