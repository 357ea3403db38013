#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neutralsum/graph.h"

namespace neutralsum {

// Probability vectors must sum to one within this tolerance.
inline constexpr double kProbabilitySumTolerance = 1e-6;

// Trigger probability for one token: (event, non-event).
struct EventPrediction {
  std::string doc_id;
  std::size_t token_index = 0;
  double p_event = 0;
  double p_non_event = 1;
};

// Distribution over MoralLabel in enum order.
struct MoralPrediction {
  std::string event_id;
  std::array<double, kNumMoralLabels> probs{};
};

// Relation distributions for one same-document pair, source first in text.
//   coref:    (coreference, non)
//   temporal: (before, after, overlap, non)
//   causal:   (causes, caused_by, non)
//   subevent: (contains, contained_by, non)
struct PairPrediction {
  std::string source_event_id;
  std::string target_event_id;
  std::array<double, 2> coref_probs{0, 1};
  std::array<double, 4> temporal_probs{0, 0, 0, 1};
  std::array<double, 3> causal_probs{0, 0, 1};
  std::array<double, 3> subevent_probs{0, 0, 1};
};

struct CrossDocCluster {
  std::vector<std::string> member_event_ids;
};

// Contents of one per-document prediction file.
struct DocumentPredictions {
  std::string doc_id;
  std::vector<EventPrediction> events;
  std::vector<MoralPrediction> morals;
  std::vector<PairPrediction> pairs;
};

// Contents of the per-cluster cross-document coreference file.
struct CrossDocPredictions {
  std::string cluster_id;
  std::vector<CrossDocCluster> clusters;
};

// Optional floor on top of the argmax rule. With the default of 0 a token is
// a trigger iff p_event > p_non_event.
struct ThresholdPolicy {
  double min_event_probability = 0.0;
};

// Word offsets: maximal runs of ASCII alphanumerics or non-ASCII bytes, with
// apostrophes and hyphens kept when they join two such runs.
std::vector<CharSpan> word_spans(std::string_view text);

// Synthetic id "d<doc_index>e<ordinal>"; doc_index is the position of the
// document in doc_id order, ordinal counts emitted triggers in that document.
std::string make_event_id(std::size_t doc_index, std::size_t ordinal);

// Throws SchemaError unless every entry is in [0,1] and the sum is 1 within
// kProbabilitySumTolerance.
void check_distribution(std::span<const double> probs, std::string_view what);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> probs);

std::vector<Event> decode_events(const Document& doc, std::size_t doc_index,
                                 std::span<const EventPrediction> preds,
                                 const ThresholdPolicy& policy = {});

std::vector<Event> decorate_moral(std::vector<Event> events,
                                  std::span<const MoralPrediction> preds);

// Decodes each relation family independently. `events` resolves endpoints and
// checks that the source precedes the target in the same document.
std::vector<EventRelation> decode_relations(std::span<const PairPrediction> pairs,
                                            std::span<const Event> events);

// Adds a chain of coreference edges through each cluster (members sorted by
// doc_id, then offset) and recomputes the coreference partition.
MultiDocGraph attach_crossdoc(const MultiDocGraph& graph, std::span<const CrossDocCluster> clusters);

// Decodes every document's predictions into one graph without cross-document
// edges. `predictions` is matched to documents by doc_id.
MultiDocGraph ingest_cluster(std::string cluster_id, std::vector<Document> documents,
                             std::span<const DocumentPredictions> predictions,
                             const ThresholdPolicy& policy = {});

}  // namespace neutralsum
