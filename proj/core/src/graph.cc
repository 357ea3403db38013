#include "neutralsum/graph.h"

#include <algorithm>
#include <tuple>
#include <unordered_set>

#include "neutralsum/error.h"
#include "neutralsum/union_find.h"

namespace neutralsum {
namespace {

constexpr std::array<std::string_view, 4> kIdeologyNames = {"left", "center", "right", "unknown"};

constexpr std::array<std::string_view, kNumMoralLabels> kMoralNames = {
    "care",      "harm",       "fairness", "cheating",    "loyalty",   "betrayal",
    "authority", "subversion", "purity",   "degradation", "non_moral",
};

constexpr std::array<std::string_view, kNumRelationLabels> kRelationNames = {
    "coreference", "before",    "after",    "overlap",
    "causes",      "caused_by", "contains", "contained_by",
};

constexpr std::array<std::string_view, kNumRelationLabels> kRelationSurface = {
    "coreference", "before",    "after",    "overlap",
    "causes",      "caused by", "contains", "contained by",
};

template <typename Enum, std::size_t N>
Enum parse_name(const std::array<std::string_view, N>& names, std::string_view s,
                std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  throw SchemaError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

std::string describe(const EventRelation& r) {
  return "relation " + r.source + "->" + r.target + " (" + std::string(to_string(r.label)) + ")";
}

}  // namespace

RelationFamily family_of(RelationLabel label) {
  switch (label) {
    case RelationLabel::kCoreference:
      return RelationFamily::kCoreference;
    case RelationLabel::kBefore:
    case RelationLabel::kAfter:
    case RelationLabel::kOverlap:
      return RelationFamily::kTemporal;
    case RelationLabel::kCauses:
    case RelationLabel::kCausedBy:
      return RelationFamily::kCausal;
    case RelationLabel::kContains:
    case RelationLabel::kContainedBy:
      return RelationFamily::kSubevent;
  }
  return RelationFamily::kCoreference;
}

std::string_view to_string(Ideology v) { return kIdeologyNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(MoralLabel v) { return kMoralNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(RelationLabel v) { return kRelationNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(EdgeScope v) { return v == EdgeScope::kInDoc ? "in_doc" : "cross_doc"; }
std::string_view surface_form(RelationLabel v) {
  return kRelationSurface[static_cast<std::size_t>(v)];
}

Ideology parse_ideology(std::string_view s) {
  return parse_name<Ideology>(kIdeologyNames, s, "ideology_tag");
}
MoralLabel parse_moral(std::string_view s) { return parse_name<MoralLabel>(kMoralNames, s, "moral"); }
RelationLabel parse_relation(std::string_view s) {
  return parse_name<RelationLabel>(kRelationNames, s, "relation label");
}
RelationLabel parse_relation_surface_form(std::string_view s) {
  return parse_name<RelationLabel>(kRelationSurface, s, "relation word");
}
EdgeScope parse_scope(std::string_view s) {
  if (s == "in_doc") return EdgeScope::kInDoc;
  if (s == "cross_doc") return EdgeScope::kCrossDoc;
  throw SchemaError("unknown scope '" + std::string(s) + "'");
}

// --- MultiDocGraph --------------------------------------------------------

MultiDocGraph::MultiDocGraph(std::string cluster_id, std::vector<Document> documents,
                             std::vector<Event> events, std::vector<EventRelation> relations,
                             std::vector<CorefClass> coref_partition)
    : cluster_id_(std::move(cluster_id)),
      documents_(std::move(documents)),
      events_(std::move(events)),
      relations_(std::move(relations)),
      coref_partition_(std::move(coref_partition)) {
  std::stable_sort(documents_.begin(), documents_.end(),
                   [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  std::stable_sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
    return std::tie(a.doc_id, a.trigger_span.begin, a.event_id) <
           std::tie(b.doc_id, b.trigger_span.begin, b.event_id);
  });

  auto key = [](const EventRelation& r) { return std::tie(r.source, r.label, r.target); };
  std::stable_sort(relations_.begin(), relations_.end(),
                   [&](const EventRelation& a, const EventRelation& b) { return key(a) < key(b); });
  relations_.erase(std::unique(relations_.begin(), relations_.end(),
                               [&](const EventRelation& a, const EventRelation& b) {
                                 return key(a) == key(b);
                               }),
                   relations_.end());

  for (auto& cls : coref_partition_) std::sort(cls.begin(), cls.end());
  std::sort(coref_partition_.begin(), coref_partition_.end());

  for (std::size_t i = 0; i < events_.size(); ++i) event_pos_.emplace(events_[i].event_id, i);
  for (std::size_t i = 0; i < documents_.size(); ++i) doc_pos_.emplace(documents_[i].doc_id, i);
}

const Event* MultiDocGraph::find_event(std::string_view event_id) const {
  auto it = event_pos_.find(std::string(event_id));
  return it == event_pos_.end() ? nullptr : &events_[it->second];
}

const Document* MultiDocGraph::find_document(std::string_view doc_id) const {
  auto it = doc_pos_.find(std::string(doc_id));
  return it == doc_pos_.end() ? nullptr : &documents_[it->second];
}

std::optional<std::size_t> MultiDocGraph::event_index(std::string_view event_id) const {
  auto it = event_pos_.find(std::string(event_id));
  if (it == event_pos_.end()) return std::nullopt;
  return it->second;
}

bool MultiDocGraph::operator==(const MultiDocGraph& other) const {
  return cluster_id_ == other.cluster_id_ && documents_ == other.documents_ &&
         events_ == other.events_ && relations_ == other.relations_ &&
         coref_partition_ == other.coref_partition_;
}

// --- validate -------------------------------------------------------------

bool ValidationResult::has_rule(std::string_view rule) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.rule == rule; });
}

ValidationResult validate(const MultiDocGraph& graph, const ValidateOptions& options) {
  ValidationResult result;
  auto flag = [&](std::string element, std::string rule) {
    result.violations.push_back({std::move(element), std::move(rule)});
  };

  const auto& docs = graph.documents();
  if (docs.empty()) flag("cluster " + graph.cluster_id(), "cluster has no documents");

  for (std::size_t d = 0; d < docs.size(); ++d) {
    const Document& doc = docs[d];
    const std::string where = "document " + doc.doc_id;
    if (d > 0 && docs[d - 1].doc_id == doc.doc_id) flag(where, "duplicate doc_id");
    for (std::size_t t = 0; t < doc.token_spans.size(); ++t) {
      const CharSpan& s = doc.token_spans[t];
      if (s.begin >= s.end || s.end > doc.text.size()) {
        flag(where + " token " + std::to_string(t), "token span out of bounds");
      }
      if (t > 0 && doc.token_spans[t - 1].end > s.begin) {
        flag(where + " token " + std::to_string(t), "token spans must be increasing and disjoint");
      }
    }
  }

  if (options.strict_neus) {
    std::multiset<Ideology> tags;
    for (const auto& doc : docs) tags.insert(doc.ideology_tag);
    const std::multiset<Ideology> expected = {Ideology::kLeft, Ideology::kCenter, Ideology::kRight};
    if (docs.size() != 3 || tags != expected) {
      flag("cluster " + graph.cluster_id(), "strict NeuS cluster needs one left, center and right document");
    }
  }

  std::unordered_set<std::string> seen_events;
  for (const Event& ev : graph.events()) {
    const std::string where = "event " + ev.event_id;
    if (!seen_events.insert(ev.event_id).second) flag(where, "duplicate event_id");
    const Document* doc = graph.find_document(ev.doc_id);
    if (doc == nullptr) {
      flag(where, "unknown doc_id");
      continue;
    }
    const CharSpan& s = ev.trigger_span;
    if (s.begin >= s.end || s.end > doc->text.size()) {
      flag(where, "trigger span outside document");
    } else if (doc->text.compare(s.begin, s.end - s.begin, ev.trigger_text) != 0) {
      flag(where, "trigger_text does not match document text");
    }
  }

  for (const EventRelation& r : graph.relations()) {
    const std::string where = describe(r);
    if (r.source == r.target) flag(where, "self loop");
    const Event* src = graph.find_event(r.source);
    const Event* dst = graph.find_event(r.target);
    if (src == nullptr || dst == nullptr) {
      flag(where, "dangling endpoint");
      continue;
    }
    if (r.scope == EdgeScope::kInDoc) {
      if (src->doc_id != dst->doc_id) {
        flag(where, "in-doc edge connects different documents");
      } else if (!(src->trigger_span.begin < dst->trigger_span.begin)) {
        flag(where, "in-doc edge must follow textual order");
      }
    } else {
      if (r.label != RelationLabel::kCoreference) {
        flag(where, "cross-doc edges must be coreference");
      }
      if (src->doc_id == dst->doc_id) flag(where, "cross-doc edge within one document");
    }
  }

  if (!options.check_partition) return result;

  std::unordered_map<std::string, std::size_t> class_of;
  const auto& partition = graph.coref_partition();
  for (std::size_t c = 0; c < partition.size(); ++c) {
    const std::string where = "coref class " + std::to_string(c);
    if (partition[c].size() < 2) flag(where, "coreference class smaller than 2");
    for (const auto& id : partition[c]) {
      if (graph.find_event(id) == nullptr) flag(where + " member " + id, "unknown event in partition");
      if (!class_of.emplace(id, c).second) flag(where + " member " + id, "partition classes overlap");
    }
  }
  for (const EventRelation& r : graph.relations()) {
    if (r.label != RelationLabel::kCoreference) continue;
    auto a = class_of.find(r.source);
    auto b = class_of.find(r.target);
    if (a == class_of.end() || b == class_of.end() || a->second != b->second) {
      flag(describe(r), "coreference edge endpoints not in one partition class");
    }
  }
  return result;
}

// --- merge_coreference ----------------------------------------------------

MultiDocGraph merge_coreference(const MultiDocGraph& graph) {
  const auto& events = graph.events();
  DisjointSets sets(events.size());
  for (const EventRelation& r : graph.relations()) {
    auto a = graph.event_index(r.source);
    auto b = graph.event_index(r.target);
    if (!a || !b) throw SchemaError(describe(r) + ": dangling endpoint");
    if (r.label == RelationLabel::kCoreference) sets.unite(*a, *b);
  }

  std::map<std::size_t, CorefClass> components;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (sets.component_size(i) >= 2) components[sets.find(i)].push_back(events[i].event_id);
  }
  std::vector<CorefClass> partition;
  partition.reserve(components.size());
  for (auto& [root, members] : components) partition.push_back(std::move(members));

  return MultiDocGraph(graph.cluster_id(), graph.documents(), graph.events(), graph.relations(),
                       std::move(partition));
}

// --- statistics -----------------------------------------------------------

GraphStats compute_stats(const MultiDocGraph& graph) {
  GraphStats stats;
  stats.n_events = graph.events().size();
  std::map<std::string, std::size_t> per_doc;
  for (const Event& ev : graph.events()) {
    if (ev.moral != MoralLabel::kNonMoral) ++stats.n_moral_events;
    ++per_doc[ev.doc_id];
  }
  for (const auto& [doc, k] : per_doc) stats.n_event_pairs += k * (k - 1) / 2;

  for (const EventRelation& r : graph.relations()) {
    if (r.scope == EdgeScope::kCrossDoc) {
      ++stats.n_crossdoc_coref;
      continue;
    }
    switch (family_of(r.label)) {
      case RelationFamily::kCoreference: ++stats.n_coref; break;
      case RelationFamily::kTemporal: ++stats.n_temporal; break;
      case RelationFamily::kCausal: ++stats.n_causal; break;
      case RelationFamily::kSubevent: ++stats.n_subevent; break;
    }
  }
  return stats;
}

GraphStatsMean mean_stats(std::span<const GraphStats> stats) {
  GraphStatsMean mean;
  if (stats.empty()) return mean;
  for (const GraphStats& s : stats) {
    mean.n_events += static_cast<double>(s.n_events);
    mean.n_moral_events += static_cast<double>(s.n_moral_events);
    mean.n_event_pairs += static_cast<double>(s.n_event_pairs);
    mean.n_coref += static_cast<double>(s.n_coref);
    mean.n_temporal += static_cast<double>(s.n_temporal);
    mean.n_causal += static_cast<double>(s.n_causal);
    mean.n_subevent += static_cast<double>(s.n_subevent);
    mean.n_crossdoc_coref += static_cast<double>(s.n_crossdoc_coref);
  }
  const double n = static_cast<double>(stats.size());
  for (double* field : {&mean.n_events, &mean.n_moral_events, &mean.n_event_pairs, &mean.n_coref,
                        &mean.n_temporal, &mean.n_causal, &mean.n_subevent, &mean.n_crossdoc_coref}) {
    *field /= n;
  }
  return mean;
}

EventSplit common_vs_unique_events(const MultiDocGraph& graph) {
  EventSplit split;
  for (const CorefClass& cls : graph.coref_partition()) {
    std::set<std::string> docs;
    for (const auto& id : cls) {
      if (const Event* ev = graph.find_event(id)) docs.insert(ev->doc_id);
    }
    if (docs.size() >= 2) split.common.insert(cls.begin(), cls.end());
  }
  for (const Event& ev : graph.events()) {
    if (!split.common.contains(ev.event_id)) split.unique_per_doc[ev.doc_id].insert(ev.event_id);
  }
  return split;
}

}  // namespace neutralsum
