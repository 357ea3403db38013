#include "test_support.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <unistd.h>

#include "neutralsum/ingestion.h"

namespace neutralsum::testing {

namespace {

const std::vector<std::string> kPlainWords = {"court", "ban",   "reinstated", "protect", "said",
                                              "the",   "vote",  "deal",       "cuts",    "rule",
                                              "x-ray", "won't"};
const std::vector<std::string> kAwkwardWords = {"a|b", "back\\slash", "caf\xc3\xa9", "||", "\\|",
                                                "pipe|", "na\xc3\xafve"};

const std::vector<Ideology> kIdeologies = {Ideology::kLeft, Ideology::kCenter, Ideology::kRight,
                                           Ideology::kUnknown};

}  // namespace

MultiDocGraph random_graph(Rng& rng, const GraphGenOptions& o) {
  const int n_docs = rng.uniform_int(o.min_docs, o.max_docs);
  std::vector<Document> docs;
  std::vector<std::string> ids;
  for (int d = 0; d < n_docs; ++d) ids.push_back("doc" + std::to_string(d));
  std::shuffle(ids.begin(), ids.end(), rng.engine());

  std::vector<Event> events;
  // Events per document in textual order, keyed by the sorted doc position.
  std::map<std::string, std::vector<std::size_t>> by_doc;
  for (int d = 0; d < n_docs; ++d) {
    Document doc;
    doc.doc_id = ids[static_cast<std::size_t>(d)];
    doc.ideology_tag = rng.pick(kIdeologies);
    const int n_words = rng.uniform_int(0, o.max_words);
    for (int w = 0; w < n_words; ++w) {
      const std::string& word =
          o.awkward_words && rng.coin(0.3) ? rng.pick(kAwkwardWords) : rng.pick(kPlainWords);
      if (!doc.text.empty()) doc.text += ' ';
      doc.token_spans.push_back({doc.text.size(), doc.text.size() + word.size()});
      doc.text += word;
    }
    docs.push_back(std::move(doc));
  }
  std::vector<Document> sorted = docs;
  std::sort(sorted.begin(), sorted.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  for (std::size_t d = 0; d < sorted.size(); ++d) {
    const Document& doc = sorted[d];
    std::size_t ordinal = 0;
    for (const CharSpan& span : doc.token_spans) {
      if (!rng.coin(o.event_rate)) continue;
      Event ev;
      ev.event_id = make_event_id(d, ordinal++);
      ev.doc_id = doc.doc_id;
      ev.trigger_span = span;
      ev.trigger_text = doc.text.substr(span.begin, span.end - span.begin);
      ev.moral = static_cast<MoralLabel>(rng.uniform_int(0, kNumMoralLabels - 1));
      by_doc[doc.doc_id].push_back(events.size());
      events.push_back(std::move(ev));
    }
  }

  std::vector<EventRelation> relations;
  for (const auto& [doc_id, members] : by_doc) {
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        if (!rng.coin(o.edge_rate)) continue;
        const auto label = static_cast<RelationLabel>(rng.uniform_int(0, kNumRelationLabels - 1));
        relations.push_back({events[members[a]].event_id, events[members[b]].event_id, label,
                             EdgeScope::kInDoc});
      }
    }
  }
  for (std::size_t a = 0; a < events.size(); ++a) {
    for (std::size_t b = 0; b < events.size(); ++b) {
      if (events[a].doc_id == events[b].doc_id || !rng.coin(o.crossdoc_rate / 2)) continue;
      relations.push_back({events[a].event_id, events[b].event_id, RelationLabel::kCoreference,
                           EdgeScope::kCrossDoc});
    }
  }
  std::shuffle(relations.begin(), relations.end(), rng.engine());
  std::shuffle(events.begin(), events.end(), rng.engine());
  return merge_coreference(
      MultiDocGraph("cluster", std::move(docs), std::move(events), std::move(relations)));
}

EncoderCase random_encoder_case(Rng& rng, int min_nodes, int max_nodes, int min_dim, int max_dim) {
  EncoderCase c;
  c.config.d_node = rng.uniform_int(min_dim, max_dim);
  c.config.d_rel = rng.uniform_int(min_dim, max_dim);
  c.config.d_k = rng.uniform_int(min_dim, max_dim);
  c.config.d_hidden = rng.uniform_int(min_dim, max_dim);
  c.config.d_llm = rng.uniform_int(min_dim, max_dim);
  c.config.n_layers = rng.uniform_int(1, 3);
  c.config.scale_attention = rng.coin();
  c.config.seed = static_cast<std::uint64_t>(rng.uniform_int(0, 1 << 30));

  const int n = rng.uniform_int(min_nodes, max_nodes);
  c.graph.n_nodes = static_cast<std::size_t>(n);
  for (int i = 0; i < n; ++i) {
    c.graph.morals.push_back(static_cast<MoralLabel>(rng.uniform_int(0, kNumMoralLabels - 1)));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || !rng.coin(0.45)) continue;
      c.graph.edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                               static_cast<RelationLabel>(rng.uniform_int(0, 3))});
    }
  }
  c.init.resize(c.config.d_node, n);
  for (Eigen::Index k = 0; k < c.init.size(); ++k) c.init.data()[k] = rng.uniform(-1, 1);
  c.params = EncoderParams::glorot(c.config);
  return c;
}

double oracle_rouge_n(const Tokens& hyp, const Tokens& ref, int n) {
  auto grams = [n](const Tokens& t) {
    std::vector<Tokens> out;
    for (int i = 0; i + n <= static_cast<int>(t.size()); ++i) {
      out.emplace_back(t.begin() + i, t.begin() + i + n);
    }
    return out;
  };
  const auto h = grams(hyp);
  const auto r = grams(ref);
  if (h.empty() || r.empty()) return 0.0;
  // Match each hypothesis n-gram against a not-yet-used reference n-gram.
  std::vector<bool> used(r.size(), false);
  int overlap = 0;
  for (const Tokens& g : h) {
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (!used[k] && r[k] == g) {
        used[k] = true;
        ++overlap;
        break;
      }
    }
  }
  const double p = static_cast<double>(overlap) / static_cast<double>(h.size());
  const double rc = static_cast<double>(overlap) / static_cast<double>(r.size());
  return p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
}

int oracle_lcs(const Tokens& a, const Tokens& b) {
  std::map<std::pair<std::size_t, std::size_t>, int> memo;
  auto go = [&](auto&& self, std::size_t i, std::size_t j) -> int {
    if (i == a.size() || j == b.size()) return 0;
    auto it = memo.find({i, j});
    if (it != memo.end()) return it->second;
    const int v = a[i] == b[j] ? 1 + self(self, i + 1, j + 1)
                               : std::max(self(self, i + 1, j), self(self, i, j + 1));
    memo[{i, j}] = v;
    return v;
  };
  return go(go, 0, 0);
}

double oracle_rouge_l(const Tokens& hyp, const Tokens& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const double lcs = oracle_lcs(ref, hyp);
  const double p = lcs / static_cast<double>(hyp.size());
  const double r = lcs / static_cast<double>(ref.size());
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

namespace {

// Reference-side LCS positions, backtracking from the end and preferring to
// drop a candidate token when the table says it is strictly better.
std::vector<std::size_t> lcs_positions(const Tokens& ref, const Tokens& cand) {
  const std::size_t m = ref.size();
  const std::size_t n = cand.size();
  std::vector<std::vector<int>> t(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      t[i][j] = ref[i - 1] == cand[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  std::vector<std::size_t> out;
  std::size_t i = m;
  std::size_t j = n;
  while (i > 0 && j > 0) {
    if (ref[i - 1] == cand[j - 1]) {
      out.insert(out.begin(), i - 1);
      --i;
      --j;
    } else if (t[i][j - 1] > t[i - 1][j]) {
      --j;
    } else {
      --i;
    }
  }
  return out;
}

}  // namespace

double oracle_rouge_lsum(const std::vector<Tokens>& hyp, const std::vector<Tokens>& ref) {
  std::map<std::string, int> hyp_count;
  std::map<std::string, int> ref_count;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  for (const Tokens& s : hyp) {
    hyp_len += s.size();
    for (const auto& t : s) ++hyp_count[t];
  }
  for (const Tokens& s : ref) {
    ref_len += s.size();
    for (const auto& t : s) ++ref_count[t];
  }
  if (hyp_len == 0 || ref_len == 0) return 0.0;
  int hits = 0;
  for (const Tokens& r : ref) {
    std::set<std::size_t> uni;
    for (const Tokens& h : hyp) {
      for (std::size_t p : lcs_positions(r, h)) uni.insert(p);
    }
    for (std::size_t p : uni) {
      const std::string& tok = r[p];
      if (hyp_count[tok] > 0 && ref_count[tok] > 0) {
        ++hits;
        --hyp_count[tok];
        --ref_count[tok];
      }
    }
  }
  const double p = static_cast<double>(hits) / static_cast<double>(hyp_len);
  const double rc = static_cast<double>(hits) / static_cast<double>(ref_len);
  return p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
}

double oracle_bleu2(const Tokens& hyp, const Tokens& ref, bool smoothing, double epsilon) {
  if (hyp.empty()) return 0.0;
  double log_sum = 0;
  for (int n = 1; n <= 2; ++n) {
    int total = 0;
    int matched = 0;
    std::vector<bool> used(ref.size() >= static_cast<std::size_t>(n) ? ref.size() - n + 1 : 0, false);
    for (int i = 0; i + n <= static_cast<int>(hyp.size()); ++i) {
      ++total;
      for (std::size_t k = 0; k < used.size(); ++k) {
        bool same = !used[k];
        for (int q = 0; same && q < n; ++q) same = hyp[i + q] == ref[k + q];
        if (same) {
          used[k] = true;
          ++matched;
          break;
        }
      }
    }
    double num = matched;
    if (num == 0) {
      if (!smoothing) return 0.0;
      num = epsilon;
    }
    log_sum += 0.5 * std::log(num / std::max(1, total));
  }
  const double c = static_cast<double>(hyp.size());
  const double r = static_cast<double>(ref.size());
  return (c > r ? 1.0 : std::exp(1.0 - r / c)) * std::exp(log_sum);
}

Tokens random_tokens(Rng& rng, int max_len, int vocab) {
  Tokens t;
  const int len = rng.uniform_int(0, max_len);
  for (int i = 0; i < len; ++i) t.push_back("w" + std::to_string(rng.uniform_int(0, vocab - 1)));
  return t;
}

std::vector<BlockError> gradient_check(const EncoderCase& c, const SoftPromptLoss& loss, double h) {
  const GradientResult analytic = gradient(c.graph, c.init, c.params, c.config, loss);
  EncoderParams probe = c.params;
  auto eval = [&] { return loss.evaluate(forward(c.graph, c.init, probe, c.config).soft_prompt, nullptr); };

  std::vector<BlockError> out;
  std::vector<Eigen::VectorXd> numeric;
  probe.for_each([&](const std::string& name, auto& tensor) {
    Eigen::VectorXd g(tensor.size());
    for (Eigen::Index k = 0; k < tensor.size(); ++k) {
      const double saved = tensor.data()[k];
      tensor.data()[k] = saved + h;
      const double up = eval();
      tensor.data()[k] = saved - h;
      const double down = eval();
      tensor.data()[k] = saved;
      g(k) = (up - down) / (2 * h);
    }
    numeric.push_back(std::move(g));
    out.push_back({name, 0});
  });
  std::size_t b = 0;
  analytic.grads.for_each([&](const std::string&, const auto& tensor) {
    const Eigen::Map<const Eigen::VectorXd> a(tensor.data(), tensor.size());
    const double diff = (a - numeric[b]).norm();
    const double scale = a.norm() + numeric[b].norm();
    out[b].relative_error = diff == 0 ? 0.0 : diff / std::max(scale, kGradientNormFloor);
    out[b].analytic_norm = a.norm();
    out[b].absolute_error = diff;
    ++b;
  });
  return out;
}

GraphStats brute_force_stats(const MultiDocGraph& g) {
  GraphStats s;
  for (const Event& e : g.events()) {
    ++s.n_events;
    if (e.moral != MoralLabel::kNonMoral) ++s.n_moral_events;
  }
  for (std::size_t a = 0; a < g.events().size(); ++a) {
    for (std::size_t b = a + 1; b < g.events().size(); ++b) {
      if (g.events()[a].doc_id == g.events()[b].doc_id) ++s.n_event_pairs;
    }
  }
  for (const EventRelation& r : g.relations()) {
    const std::string name(to_string(r.label));
    if (r.scope == EdgeScope::kCrossDoc) {
      ++s.n_crossdoc_coref;
    } else if (name == "coreference") {
      ++s.n_coref;
    } else if (name == "before" || name == "after" || name == "overlap") {
      ++s.n_temporal;
    } else if (name == "causes" || name == "caused_by") {
      ++s.n_causal;
    } else {
      ++s.n_subevent;
    }
  }
  return s;
}

std::filesystem::path source_dir() { return NEUTRALSUM_SOURCE_DIR; }
std::filesystem::path fixture_dir() { return source_dir() / "tests" / "fixtures" / "e2e"; }
std::filesystem::path templates_dir() { return source_dir() / "templates"; }

std::filesystem::path scratch_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("neutralsum_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace neutralsum::testing
