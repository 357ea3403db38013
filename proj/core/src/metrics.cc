#include "neutralsum/metrics.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "neutralsum/error.h"
#include "neutralsum/json_io.h"

namespace neutralsum {
namespace {

using NgramCounts = std::map<std::vector<std::string_view>, int>;

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (n == 0 || tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::vector<std::string_view> key(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[std::move(key)];
  }
  return counts;
}

// Sum over hypothesis n-grams of min(hyp count, ref count).
int clipped_overlap(const NgramCounts& hyp, const NgramCounts& ref) {
  int overlap = 0;
  for (const auto& [gram, count] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

double f1(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

// Full LCS length table, (m+1) x (n+1), row-major.
std::vector<int> lcs_table(const Tokens& ref, const Tokens& hyp) {
  const std::size_t m = ref.size();
  const std::size_t n = hyp.size();
  std::vector<int> t((m + 1) * (n + 1), 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (ref[i - 1] == hyp[j - 1]) {
        t[i * (n + 1) + j] = t[(i - 1) * (n + 1) + j - 1] + 1;
      } else {
        t[i * (n + 1) + j] = std::max(t[(i - 1) * (n + 1) + j], t[i * (n + 1) + j - 1]);
      }
    }
  }
  return t;
}

// Indices into `ref` of one LCS, recovered right to left.
std::vector<std::size_t> lcs_indices(const Tokens& ref, const Tokens& hyp) {
  const auto t = lcs_table(ref, hyp);
  const std::size_t n = hyp.size();
  std::vector<std::size_t> idx;
  std::size_t i = ref.size();
  std::size_t j = n;
  while (i > 0 && j > 0) {
    if (ref[i - 1] == hyp[j - 1]) {
      idx.push_back(i - 1);
      --i;
      --j;
    } else if (t[i * (n + 1) + j - 1] > t[(i - 1) * (n + 1) + j]) {
      --j;
    } else {
      --i;
    }
  }
  std::reverse(idx.begin(), idx.end());
  return idx;
}

double parse_unit_interval(std::string_view s, std::size_t line_no, const char* field) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw SchemaError("lexicon line " + std::to_string(line_no) + ": bad " + field);
  }
  if (!(v >= 0.0 && v <= 1.0)) {
    throw SchemaError("lexicon line " + std::to_string(line_no) + ": " + field + " outside [0,1]");
  }
  return v;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

template <typename OnLine>
void for_each_line(std::string_view text, OnLine on_line) {
  std::size_t start = 0;
  std::size_t line_no = 1;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    on_line(line, line_no++);
    start = end + 1;
  }
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::string current;
  for (char raw : text) {
    char c = raw;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      current.push_back(c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  auto keep = [&](std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return;
    const auto last = s.find_last_not_of(" \t\r\n");
    sentences.emplace_back(s.substr(first, last - first + 1));
  };
  if (text.find('\n') != std::string_view::npos) {
    for_each_line(text, [&](std::string_view line, std::size_t) { keep(line); });
    return sentences;
  }
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    const bool at_boundary =
        i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\t';
    if (!at_boundary) continue;
    keep(text.substr(start, i + 1 - start));
    start = i + 1;
  }
  keep(text.substr(start));
  return sentences;
}

double rouge_n(const Tokens& hyp, const Tokens& ref, int n) {
  if (n < 1) throw Error("rouge_n: n must be positive");
  const auto h = count_ngrams(hyp, static_cast<std::size_t>(n));
  const auto r = count_ngrams(ref, static_cast<std::size_t>(n));
  const int h_total = hyp.size() >= static_cast<std::size_t>(n) ? static_cast<int>(hyp.size()) - n + 1 : 0;
  const int r_total = ref.size() >= static_cast<std::size_t>(n) ? static_cast<int>(ref.size()) - n + 1 : 0;
  if (h_total == 0 || r_total == 0) return 0.0;
  const int overlap = clipped_overlap(h, r);
  return f1(static_cast<double>(overlap) / h_total, static_cast<double>(overlap) / r_total);
}

double rouge_n(std::string_view hyp, std::string_view ref, int n) {
  return rouge_n(tokenize(hyp), tokenize(ref), n);
}

double rouge_l(const Tokens& hyp, const Tokens& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  // Two-row DP; only the length is needed here.
  std::vector<int> prev(hyp.size() + 1, 0);
  std::vector<int> cur(hyp.size() + 1, 0);
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      cur[j] = ref[i - 1] == hyp[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[hyp.size()];
  return f1(lcs / static_cast<double>(hyp.size()), lcs / static_cast<double>(ref.size()));
}

double rouge_l(std::string_view hyp, std::string_view ref) {
  return rouge_l(tokenize(hyp), tokenize(ref));
}

double rouge_lsum(std::span<const Tokens> hyp_sentences, std::span<const Tokens> ref_sentences) {
  std::size_t m = 0;
  std::size_t n = 0;
  std::unordered_map<std::string, int> ref_left;
  std::unordered_map<std::string, int> hyp_left;
  for (const auto& s : ref_sentences) {
    m += s.size();
    for (const auto& t : s) ++ref_left[t];
  }
  for (const auto& s : hyp_sentences) {
    n += s.size();
    for (const auto& t : s) ++hyp_left[t];
  }
  if (m == 0 || n == 0) return 0.0;

  int hits = 0;
  for (const Tokens& ref : ref_sentences) {
    std::vector<std::size_t> union_idx;
    for (const Tokens& hyp : hyp_sentences) {
      const auto idx = lcs_indices(ref, hyp);
      union_idx.insert(union_idx.end(), idx.begin(), idx.end());
    }
    std::sort(union_idx.begin(), union_idx.end());
    union_idx.erase(std::unique(union_idx.begin(), union_idx.end()), union_idx.end());
    for (std::size_t i : union_idx) {
      const std::string& tok = ref[i];
      int& h = hyp_left[tok];
      int& r = ref_left[tok];
      if (h > 0 && r > 0) {
        ++hits;
        --h;
        --r;
      }
    }
  }
  return f1(static_cast<double>(hits) / static_cast<double>(n),
            static_cast<double>(hits) / static_cast<double>(m));
}

double rouge_lsum(std::string_view hyp, std::string_view ref) {
  std::vector<Tokens> h;
  std::vector<Tokens> r;
  for (const auto& s : split_sentences(hyp)) h.push_back(tokenize(s));
  for (const auto& s : split_sentences(ref)) r.push_back(tokenize(s));
  return rouge_lsum(h, r);
}

double bleu2(const Tokens& hyp, const Tokens& ref, const BleuOptions& options) {
  if (hyp.empty()) return 0.0;
  double log_sum = 0;
  for (std::size_t n = 1; n <= 2; ++n) {
    const auto h = count_ngrams(hyp, n);
    const auto r = count_ngrams(ref, n);
    const int total = hyp.size() >= n ? static_cast<int>(hyp.size() - n + 1) : 0;
    const double denominator = std::max(1, total);
    double numerator = clipped_overlap(h, r);
    if (numerator == 0) {
      if (!options.smoothing) return 0.0;
      numerator = options.epsilon;
    }
    log_sum += 0.5 * std::log(numerator / denominator);
  }
  const double c = static_cast<double>(hyp.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

double bleu2(std::string_view hyp, std::string_view ref, const BleuOptions& options) {
  return bleu2(tokenize(hyp), tokenize(ref), options);
}

// --- lexicon and arousal ---------------------------------------------------

VadLexicon VadLexicon::parse(std::string_view tsv) {
  VadLexicon lex;
  for_each_line(tsv, [&](std::string_view line, std::size_t line_no) {
    if (line.empty()) return;
    const auto f = split_tabs(line);
    if (f.size() != 4) {
      throw SchemaError("lexicon line " + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    if (line_no == 1) {
      double probe = 0;
      auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), probe);
      if (ec != std::errc()) return;  // header
    }
    lex.insert(f[0], {parse_unit_interval(f[1], line_no, "valence"),
                      parse_unit_interval(f[2], line_no, "arousal"),
                      parse_unit_interval(f[3], line_no, "dominance")});
  });
  return lex;
}

VadLexicon VadLexicon::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

void VadLexicon::insert(std::string_view word, VadEntry entry) {
  entries_.insert_or_assign(lowercase(word), entry);
}

const VadEntry* VadLexicon::find(std::string_view word) const {
  auto it = entries_.find(std::string(word));
  return it == entries_.end() ? nullptr : &it->second;
}

ArousalScores arousal(std::string_view summary, const VadLexicon& lexicon,
                      const ArousalThresholds& thresholds) {
  ArousalScores s;
  for (const auto& tok : tokenize(summary)) {
    const VadEntry* e = lexicon.find(tok);
    if (e == nullptr) continue;
    if (e->valence >= thresholds.positive_valence) {
      s.p_arousal += e->arousal;
    } else if (e->valence <= thresholds.negative_valence) {
      s.n_arousal += e->arousal;
    }
  }
  s.sum_arousal = s.p_arousal + s.n_arousal;
  return s;
}

// --- ideology --------------------------------------------------------------

double polarization(const IdeologyProbs& probs) {
  const double p[3] = {probs.p_liberal, probs.p_center, probs.p_conservative};
  double sum = 0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw SchemaError("ideology probabilities must lie in [0,1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw SchemaError("ideology probabilities must sum to 1");
  return 1.0 - probs.p_center;
}

KeywordIdeologyScorer KeywordIdeologyScorer::parse(std::string_view tsv) {
  KeywordIdeologyScorer scorer;
  for_each_line(tsv, [&](std::string_view line, std::size_t line_no) {
    if (line.empty() || line.front() == '#') return;
    const auto f = split_tabs(line);
    if (f.size() != 2 || (f[1] != "left" && f[1] != "right")) {
      throw SchemaError("ideology keyword line " + std::to_string(line_no) +
                        ": expected word<TAB>left|right");
    }
    scorer.is_left_.insert_or_assign(lowercase(f[0]), f[1] == "left");
  });
  return scorer;
}

KeywordIdeologyScorer KeywordIdeologyScorer::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

IdeologyProbs KeywordIdeologyScorer::score(std::string_view text) const {
  double left = 1;
  double right = 1;
  const double center = 2;
  for (const auto& tok : tokenize(text)) {
    auto it = is_left_.find(tok);
    if (it == is_left_.end()) continue;
    (it->second ? left : right) += 1;
  }
  const double total = left + center + right;
  return {left / total, center / total, right / total};
}

SummaryScores score_summary(std::string_view hyp, std::string_view ref, const VadLexicon& lexicon,
                            const IdeologyProbs& ideology, const ScoringOptions& options) {
  const Tokens h = tokenize(hyp);
  const Tokens r = tokenize(ref);
  SummaryScores s;
  s.rouge1 = rouge_n(h, r, 1);
  s.rouge2 = rouge_n(h, r, 2);
  s.rougeL = rouge_l(h, r);
  s.rougeLsum = rouge_lsum(hyp, ref);
  s.bleu2 = bleu2(h, r, options.bleu);
  s.arousal = arousal(hyp, lexicon, options.thresholds);
  s.polarization = polarization(ideology);
  return s;
}

}  // namespace neutralsum
