#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace neutralsum {

enum class Ideology : std::uint8_t { kLeft, kCenter, kRight, kUnknown };

// Ten moral foundation poles plus the non-moral class, in classifier output
// order. Index positions are part of the prediction file contract.
enum class MoralLabel : std::uint8_t {
  kCare,
  kHarm,
  kFairness,
  kCheating,
  kLoyalty,
  kBetrayal,
  kAuthority,
  kSubversion,
  kPurity,
  kDegradation,
  kNonMoral,
};
inline constexpr std::size_t kNumMoralLabels = 11;

// The relation set. Canonical order is used for row ordering, for the encoder's
// per-relation neighbourhoods, and for the relation embedding table.
enum class RelationLabel : std::uint8_t {
  kCoreference,
  kBefore,
  kAfter,
  kOverlap,
  kCauses,
  kCausedBy,
  kContains,
  kContainedBy,
};
inline constexpr std::size_t kNumRelationLabels = 8;

inline constexpr std::array<RelationLabel, kNumRelationLabels> kAllRelationLabels = {
    RelationLabel::kCoreference, RelationLabel::kBefore,   RelationLabel::kAfter,
    RelationLabel::kOverlap,     RelationLabel::kCauses,   RelationLabel::kCausedBy,
    RelationLabel::kContains,    RelationLabel::kContainedBy,
};

enum class RelationFamily : std::uint8_t { kCoreference, kTemporal, kCausal, kSubevent };

enum class EdgeScope : std::uint8_t { kInDoc, kCrossDoc };

RelationFamily family_of(RelationLabel label);

std::string_view to_string(Ideology v);
std::string_view to_string(MoralLabel v);
std::string_view to_string(RelationLabel v);  // snake_case, e.g. "caused_by"
std::string_view to_string(EdgeScope v);

// Words used in prompts, e.g. "caused by". Distinct from the JSON names.
std::string_view surface_form(RelationLabel v);

// Parsers throw SchemaError on unknown names.
Ideology parse_ideology(std::string_view s);
MoralLabel parse_moral(std::string_view s);
RelationLabel parse_relation(std::string_view s);
RelationLabel parse_relation_surface_form(std::string_view s);
EdgeScope parse_scope(std::string_view s);

// Half-open byte range [begin, end) into a document's text.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  auto operator<=>(const CharSpan&) const = default;
};

struct Document {
  std::string doc_id;
  Ideology ideology_tag = Ideology::kUnknown;
  std::string text;
  std::vector<CharSpan> token_spans;

  bool operator==(const Document&) const = default;
};

struct Event {
  std::string event_id;
  std::string doc_id;
  CharSpan trigger_span;
  std::string trigger_text;
  MoralLabel moral = MoralLabel::kNonMoral;

  bool operator==(const Event&) const = default;
};

struct EventRelation {
  std::string source;
  std::string target;
  RelationLabel label = RelationLabel::kCoreference;
  EdgeScope scope = EdgeScope::kInDoc;

  bool operator==(const EventRelation&) const = default;
};

using CorefClass = std::vector<std::string>;

// Per-cluster event relation graph. Immutable once constructed: the
// constructor puts every list into canonical order (documents by doc_id,
// events by (doc_id, char_start), relations by (source, label, target)),
// removes duplicate (source, target, label) edges, and sorts coreference
// classes. Construction never rejects data; use validate() for that.
class MultiDocGraph {
 public:
  MultiDocGraph() = default;
  MultiDocGraph(std::string cluster_id, std::vector<Document> documents,
                std::vector<Event> events, std::vector<EventRelation> relations,
                std::vector<CorefClass> coref_partition = {});

  const std::string& cluster_id() const { return cluster_id_; }
  const std::vector<Document>& documents() const { return documents_; }
  const std::vector<Event>& events() const { return events_; }
  const std::vector<EventRelation>& relations() const { return relations_; }
  const std::vector<CorefClass>& coref_partition() const { return coref_partition_; }

  const Event* find_event(std::string_view event_id) const;
  const Document* find_document(std::string_view doc_id) const;
  // Position in events(); nullopt for unknown ids.
  std::optional<std::size_t> event_index(std::string_view event_id) const;

  bool operator==(const MultiDocGraph& other) const;

 private:
  std::string cluster_id_;
  std::vector<Document> documents_;
  std::vector<Event> events_;
  std::vector<EventRelation> relations_;
  std::vector<CorefClass> coref_partition_;
  std::unordered_map<std::string, std::size_t> event_pos_;
  std::unordered_map<std::string, std::size_t> doc_pos_;
};

struct Violation {
  std::string element;  // e.g. "relation d0e1->d9e9 (before)"
  std::string rule;     // e.g. "dangling endpoint"
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has_rule(std::string_view rule) const;
};

struct ValidateOptions {
  // Require exactly three documents tagged left, center and right.
  bool strict_neus = false;
  // Check coref_partition shape and that coreference edges agree with it.
  bool check_partition = true;
};

ValidationResult validate(const MultiDocGraph& graph, const ValidateOptions& options = {});

// Replaces coref_partition with the connected components (size >= 2) of all
// coreference edges, in-doc and cross-doc alike. Throws SchemaError when an
// edge names an unknown event.
MultiDocGraph merge_coreference(const MultiDocGraph& graph);

struct GraphStats {
  std::size_t n_events = 0;
  std::size_t n_moral_events = 0;
  std::size_t n_event_pairs = 0;
  std::size_t n_coref = 0;
  std::size_t n_temporal = 0;
  std::size_t n_causal = 0;
  std::size_t n_subevent = 0;
  std::size_t n_crossdoc_coref = 0;

  bool operator==(const GraphStats&) const = default;
};

// In-doc relation counts are split by family; cross-doc coreference edges
// are counted only in n_crossdoc_coref.
GraphStats compute_stats(const MultiDocGraph& graph);

// Per-graph averages over a corpus.
struct GraphStatsMean {
  double n_events = 0;
  double n_moral_events = 0;
  double n_event_pairs = 0;
  double n_coref = 0;
  double n_temporal = 0;
  double n_causal = 0;
  double n_subevent = 0;
  double n_crossdoc_coref = 0;
};
GraphStatsMean mean_stats(std::span<const GraphStats> stats);

struct EventSplit {
  std::set<std::string> common;
  // Documents without unique events have no entry.
  std::map<std::string, std::set<std::string>> unique_per_doc;
};

// Splits events into those whose coreference class spans two or more
// documents and the rest, keyed by document.
EventSplit common_vs_unique_events(const MultiDocGraph& graph);

}  // namespace neutralsum
