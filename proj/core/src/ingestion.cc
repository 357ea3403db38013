#include "neutralsum/ingestion.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>

#include "neutralsum/error.h"

namespace neutralsum {
namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace

std::vector<CharSpan> word_spans(std::string_view text) {
  std::vector<CharSpan> spans;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n) {
      const auto c = static_cast<unsigned char>(text[j]);
      if (is_word_byte(c)) {
        ++j;
      } else if ((c == '\'' || c == '-') && j + 1 < n &&
                 is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
        j += 2;
      } else {
        break;
      }
    }
    spans.push_back({i, j});
    i = j;
  }
  return spans;
}

std::string make_event_id(std::size_t doc_index, std::size_t ordinal) {
  return "d" + std::to_string(doc_index) + "e" + std::to_string(ordinal);
}

void check_distribution(std::span<const double> probs, std::string_view what) {
  double sum = 0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw SchemaError(std::string(what) + ": probability outside [0,1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw SchemaError(std::string(what) + ": probabilities sum to " + std::to_string(sum));
  }
}

std::size_t argmax(std::span<const double> probs) {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<Event> decode_events(const Document& doc, std::size_t doc_index,
                                 std::span<const EventPrediction> preds,
                                 const ThresholdPolicy& policy) {
  const std::size_t n_tokens = doc.token_spans.size();
  if (preds.size() != n_tokens) {
    throw SchemaError("document " + doc.doc_id + ": " + std::to_string(preds.size()) +
                      " event predictions for " + std::to_string(n_tokens) + " tokens");
  }
  std::vector<const EventPrediction*> by_token(n_tokens, nullptr);
  for (const EventPrediction& p : preds) {
    if (p.doc_id != doc.doc_id) {
      throw SchemaError("event prediction for '" + p.doc_id + "' in file for " + doc.doc_id);
    }
    if (p.token_index >= n_tokens || by_token[p.token_index] != nullptr) {
      throw SchemaError("document " + doc.doc_id + ": bad or repeated token_index " +
                        std::to_string(p.token_index));
    }
    const std::array<double, 2> dist = {p.p_event, p.p_non_event};
    check_distribution(dist, "event prediction " + doc.doc_id + "#" + std::to_string(p.token_index));
    by_token[p.token_index] = &p;
  }

  std::vector<Event> events;
  for (std::size_t t = 0; t < n_tokens; ++t) {
    const EventPrediction& p = *by_token[t];
    if (!(p.p_event > p.p_non_event) || p.p_event < policy.min_event_probability) continue;
    const CharSpan span = doc.token_spans[t];
    if (span.end > doc.text.size() || span.begin >= span.end) {
      throw SchemaError("document " + doc.doc_id + ": token span out of bounds");
    }
    Event ev;
    ev.event_id = make_event_id(doc_index, events.size());
    ev.doc_id = doc.doc_id;
    ev.trigger_span = span;
    ev.trigger_text = doc.text.substr(span.begin, span.end - span.begin);
    ev.moral = MoralLabel::kNonMoral;
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<Event> decorate_moral(std::vector<Event> events, std::span<const MoralPrediction> preds) {
  std::unordered_map<std::string_view, const MoralPrediction*> by_id;
  for (const MoralPrediction& p : preds) {
    check_distribution(p.probs, "moral prediction " + p.event_id);
    by_id[p.event_id] = &p;
  }
  for (Event& ev : events) {
    auto it = by_id.find(ev.event_id);
    if (it == by_id.end()) throw SchemaError("no moral prediction for event " + ev.event_id);
    ev.moral = static_cast<MoralLabel>(argmax(it->second->probs));
  }
  return events;
}

std::vector<EventRelation> decode_relations(std::span<const PairPrediction> pairs,
                                            std::span<const Event> events) {
  static constexpr std::array<RelationLabel, 1> kCoref = {RelationLabel::kCoreference};
  static constexpr std::array<RelationLabel, 3> kTemporal = {
      RelationLabel::kBefore, RelationLabel::kAfter, RelationLabel::kOverlap};
  static constexpr std::array<RelationLabel, 2> kCausal = {RelationLabel::kCauses,
                                                           RelationLabel::kCausedBy};
  static constexpr std::array<RelationLabel, 2> kSubevent = {RelationLabel::kContains,
                                                             RelationLabel::kContainedBy};

  std::unordered_map<std::string_view, const Event*> by_id;
  for (const Event& ev : events) by_id[ev.event_id] = &ev;

  std::vector<EventRelation> out;
  for (const PairPrediction& p : pairs) {
    const std::string where = "pair " + p.source_event_id + "->" + p.target_event_id;
    auto s = by_id.find(p.source_event_id);
    auto t = by_id.find(p.target_event_id);
    if (s == by_id.end() || t == by_id.end()) throw SchemaError(where + ": unknown event");
    const Event& src = *s->second;
    const Event& dst = *t->second;
    if (src.doc_id != dst.doc_id || !(src.trigger_span.begin < dst.trigger_span.begin)) {
      throw SchemaError(where + ": source must precede target in the same document");
    }
    check_distribution(p.coref_probs, where + " coref");
    check_distribution(p.temporal_probs, where + " temporal");
    check_distribution(p.causal_probs, where + " causal");
    check_distribution(p.subevent_probs, where + " subevent");

    // The last slot of every family is its "non-" class.
    auto emit = [&](std::span<const double> probs, std::span<const RelationLabel> labels) {
      const std::size_t k = argmax(probs);
      if (k < labels.size()) {
        out.push_back({p.source_event_id, p.target_event_id, labels[k], EdgeScope::kInDoc});
      }
    };
    emit(p.coref_probs, kCoref);
    emit(p.temporal_probs, kTemporal);
    emit(p.causal_probs, kCausal);
    emit(p.subevent_probs, kSubevent);
  }
  return out;
}

MultiDocGraph attach_crossdoc(const MultiDocGraph& graph, std::span<const CrossDocCluster> clusters) {
  if (clusters.empty()) return graph;
  std::vector<EventRelation> relations = graph.relations();
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    std::vector<std::size_t> members;
    for (const auto& id : clusters[c].member_event_ids) {
      auto idx = graph.event_index(id);
      if (!idx) {
        throw SchemaError("cross-doc cluster " + std::to_string(c) + " cites unknown event " + id);
      }
      members.push_back(*idx);
    }
    // events() is already in (doc_id, char_start) order.
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (std::size_t k = 1; k < members.size(); ++k) {
      const Event& a = graph.events()[members[k - 1]];
      const Event& b = graph.events()[members[k]];
      const EdgeScope scope = a.doc_id == b.doc_id ? EdgeScope::kInDoc : EdgeScope::kCrossDoc;
      relations.push_back({a.event_id, b.event_id, RelationLabel::kCoreference, scope});
    }
  }
  return merge_coreference(MultiDocGraph(graph.cluster_id(), graph.documents(), graph.events(),
                                         std::move(relations), graph.coref_partition()));
}

MultiDocGraph ingest_cluster(std::string cluster_id, std::vector<Document> documents,
                             std::span<const DocumentPredictions> predictions,
                             const ThresholdPolicy& policy) {
  std::sort(documents.begin(), documents.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  std::map<std::string_view, const DocumentPredictions*> by_doc;
  for (const auto& p : predictions) by_doc[p.doc_id] = &p;

  std::vector<Event> all_events;
  std::vector<EventRelation> all_relations;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    const Document& doc = documents[d];
    auto it = by_doc.find(doc.doc_id);
    if (it == by_doc.end()) throw SchemaError("no predictions for document " + doc.doc_id);
    const DocumentPredictions& preds = *it->second;
    auto events = decorate_moral(decode_events(doc, d, preds.events, policy), preds.morals);
    auto relations = decode_relations(preds.pairs, events);
    all_events.insert(all_events.end(), events.begin(), events.end());
    all_relations.insert(all_relations.end(), relations.begin(), relations.end());
  }
  return merge_coreference(MultiDocGraph(std::move(cluster_id), std::move(documents),
                                         std::move(all_events), std::move(all_relations)));
}

}  // namespace neutralsum
