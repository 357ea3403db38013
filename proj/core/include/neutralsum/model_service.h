#pragma once

#include <span>
#include <string>
#include <vector>

#include "neutralsum/graph.h"
#include "neutralsum/ingestion.h"
#include "neutralsum/json_io.h"
#include "neutralsum/metrics.h"

namespace neutralsum {

// Request bodies sent to the model service. Responses reuse the prediction
// schemas:
//   POST /extract/events     Document                      -> {"predictions": [EventPrediction]}
//   POST /classify/moral     {"document", "events"}        -> {"predictions": [MoralPrediction]}
//   POST /extract/relations  {"document", "events"}        -> {"predictions": [PairPrediction]}
//   POST /coref/crossdoc     {"cluster_id", "documents", "events"} -> CrossDocPredictions
//   POST /classify/ideology  {"text"}                      -> IdeologyProbs
//   GET  /healthz                                          -> {"status": "ok"}
Json events_request(const Document& doc);
Json moral_request(const Document& doc, std::span<const Event> events);
Json relations_request(const Document& doc, std::span<const Event> events);
Json crossdoc_request(const std::string& cluster_id, std::span<const Document> docs,
                      std::span<const Event> events);
Json ideology_request(std::string_view text);

void to_json(Json& j, const IdeologyProbs& p);
// Validates the distribution (SchemaError when invalid).
void from_json(const Json& j, IdeologyProbs& p);

struct ClusterPredictions {
  std::vector<DocumentPredictions> documents;
  CrossDocPredictions crossdoc;
};

class ModelServiceClient {
 public:
  explicit ModelServiceClient(std::string base_url, double timeout_s = 30.0);

  bool healthy() const;

  std::vector<EventPrediction> extract_events(const Document& doc) const;
  std::vector<MoralPrediction> classify_moral(const Document& doc,
                                              std::span<const Event> events) const;
  std::vector<PairPrediction> extract_relations(const Document& doc,
                                                std::span<const Event> events) const;
  CrossDocPredictions coref_crossdoc(const std::string& cluster_id, std::span<const Document> docs,
                                     std::span<const Event> events) const;
  IdeologyProbs classify_ideology(std::string_view text) const;

  // Queries every endpoint for a cluster, decoding triggers between calls so
  // later requests can name events. Documents may come in any order.
  ClusterPredictions predict_cluster(const std::string& cluster_id, std::vector<Document> docs,
                                     const ThresholdPolicy& policy = {}) const;

 private:
  Json post(const std::string& path, const Json& body) const;

  std::string base_url_;
  double timeout_s_;
};

}  // namespace neutralsum
