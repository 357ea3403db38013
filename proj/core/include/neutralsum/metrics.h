#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace neutralsum {

using Tokens = std::vector<std::string>;

// Lowercases ASCII letters and splits on every byte that is not [a-z0-9].
Tokens tokenize(std::string_view text);

// Sentence split for Rouge-Lsum: on newlines when the text has any,
// otherwise after '.', '!' or '?' followed by whitespace or end of text.
// Empty sentences are dropped.
std::vector<std::string> split_sentences(std::string_view text);

// F1 of clipped n-gram overlap. 0 when either side has no n-grams.
double rouge_n(const Tokens& hyp, const Tokens& ref, int n);
double rouge_n(std::string_view hyp, std::string_view ref, int n);

// F1 from the longest common subsequence.
double rouge_l(const Tokens& hyp, const Tokens& ref);
double rouge_l(std::string_view hyp, std::string_view ref);

// Summary-level F1 from the union LCS of each reference sentence against all
// hypothesis sentences, with per-token hit clipping.
double rouge_lsum(std::span<const Tokens> hyp_sentences, std::span<const Tokens> ref_sentences);
double rouge_lsum(std::string_view hyp, std::string_view ref);

struct BleuOptions {
  // Adds epsilon to zero-count precision numerators.
  bool smoothing = false;
  double epsilon = 0.1;
};

// Cumulative BLEU-2 with weights (0.5, 0.5) and the standard brevity penalty.
// 0 when either precision is 0 (without smoothing) or the hypothesis is empty.
double bleu2(const Tokens& hyp, const Tokens& ref, const BleuOptions& options = {});
double bleu2(std::string_view hyp, std::string_view ref, const BleuOptions& options = {});

struct VadEntry {
  double valence = 0;
  double arousal = 0;
  double dominance = 0;
};

class VadLexicon {
 public:
  // Tab-separated word, valence, arousal, dominance. An optional header line
  // is skipped. Values outside [0,1] raise SchemaError.
  static VadLexicon load(const std::filesystem::path& path);
  static VadLexicon parse(std::string_view tsv);

  void insert(std::string_view word, VadEntry entry);
  const VadEntry* find(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, VadEntry> entries_;
};

struct ArousalThresholds {
  double positive_valence = 0.65;  // tokens with valence >= this are positive
  double negative_valence = 0.35;  // tokens with valence <= this are negative
};

struct ArousalScores {
  double p_arousal = 0;
  double n_arousal = 0;
  double sum_arousal = 0;
};

ArousalScores arousal(std::string_view summary, const VadLexicon& lexicon,
                      const ArousalThresholds& thresholds = {});

struct IdeologyProbs {
  double p_liberal = 0;
  double p_center = 1;
  double p_conservative = 0;
};

// 1 - p_center. Throws SchemaError for an invalid distribution.
double polarization(const IdeologyProbs& probs);

// Local stand-in for the ideology classifier: counts keyword hits per side
// and returns weights (1 + left hits, 2, 1 + right hits), normalized.
class KeywordIdeologyScorer {
 public:
  // Tab-separated "word<TAB>left" or "word<TAB>right" lines.
  static KeywordIdeologyScorer load(const std::filesystem::path& path);
  static KeywordIdeologyScorer parse(std::string_view tsv);

  IdeologyProbs score(std::string_view text) const;

 private:
  std::unordered_map<std::string, bool> is_left_;
};

struct SummaryScores {
  double rouge1 = 0;
  double rouge2 = 0;
  double rougeL = 0;
  double rougeLsum = 0;
  double bleu2 = 0;
  ArousalScores arousal;
  double polarization = 0;
};

struct ScoringOptions {
  ArousalThresholds thresholds;
  BleuOptions bleu;
};

SummaryScores score_summary(std::string_view hyp, std::string_view ref, const VadLexicon& lexicon,
                            const IdeologyProbs& ideology, const ScoringOptions& options = {});

}  // namespace neutralsum
