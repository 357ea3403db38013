#include "neutralsum/model_service.h"

#include <algorithm>

#include "http_transport.h"
#include "neutralsum/error.h"

namespace neutralsum {
namespace {

Json events_json(std::span<const Event> events) {
  Json arr = Json::array();
  for (const Event& e : events) arr.push_back(e);
  return arr;
}

template <typename T>
std::vector<T> predictions_from(const Json& j, std::string_view what) {
  if (!j.is_object() || !j.contains("predictions")) {
    throw SchemaError(std::string(what) + ": response has no predictions array");
  }
  return json_as<std::vector<T>>(j.at("predictions"), what);
}

}  // namespace

Json events_request(const Document& doc) { return doc; }

Json moral_request(const Document& doc, std::span<const Event> events) {
  return Json{{"document", doc}, {"events", events_json(events)}};
}

Json relations_request(const Document& doc, std::span<const Event> events) {
  return Json{{"document", doc}, {"events", events_json(events)}};
}

Json crossdoc_request(const std::string& cluster_id, std::span<const Document> docs,
                      std::span<const Event> events) {
  Json d = Json::array();
  for (const Document& doc : docs) d.push_back(doc);
  return Json{{"cluster_id", cluster_id}, {"documents", std::move(d)}, {"events", events_json(events)}};
}

Json ideology_request(std::string_view text) { return Json{{"text", text}}; }

void to_json(Json& j, const IdeologyProbs& p) {
  j = Json{{"p_liberal", p.p_liberal}, {"p_center", p.p_center}, {"p_conservative", p.p_conservative}};
}

void from_json(const Json& j, IdeologyProbs& p) {
  j.at("p_liberal").get_to(p.p_liberal);
  j.at("p_center").get_to(p.p_center);
  j.at("p_conservative").get_to(p.p_conservative);
  const double probs[] = {p.p_liberal, p.p_center, p.p_conservative};
  check_distribution(probs, "ideology probabilities");
}

ModelServiceClient::ModelServiceClient(std::string base_url, double timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {
  if (base_url_.empty()) throw ConfigError("model service needs a url");
}

Json ModelServiceClient::post(const std::string& path, const Json& body) const {
  const internal::HttpResponse res =
      internal::http_post_json(base_url_, path, body.dump(), {}, timeout_s_);
  const std::string where = base_url_ + path;
  if (res.status == 503 || res.status == 429 || res.status >= 500) {
    throw RemoteError(RemoteError::Kind::kTransient,
                      where + ": HTTP " + std::to_string(res.status) + " " + res.body);
  }
  if (res.status != 200) {
    throw RemoteError(RemoteError::Kind::kProtocol,
                      where + ": HTTP " + std::to_string(res.status) + " " + res.body);
  }
  try {
    return Json::parse(res.body);
  } catch (const Json::parse_error& e) {
    throw RemoteError(RemoteError::Kind::kProtocol, where + ": malformed JSON: " + e.what());
  }
}

bool ModelServiceClient::healthy() const {
  try {
    const internal::HttpResponse res = internal::http_get(base_url_, "/healthz", timeout_s_);
    if (res.status != 200) return false;
    const Json j = Json::parse(res.body, nullptr, false);
    return j.is_object() && j.value("status", "") == "ok";
  } catch (const RemoteError&) {
    return false;
  }
}

std::vector<EventPrediction> ModelServiceClient::extract_events(const Document& doc) const {
  return predictions_from<EventPrediction>(post("/extract/events", events_request(doc)),
                                           "/extract/events");
}

std::vector<MoralPrediction> ModelServiceClient::classify_moral(const Document& doc,
                                                                std::span<const Event> events) const {
  return predictions_from<MoralPrediction>(post("/classify/moral", moral_request(doc, events)),
                                           "/classify/moral");
}

std::vector<PairPrediction> ModelServiceClient::extract_relations(
    const Document& doc, std::span<const Event> events) const {
  return predictions_from<PairPrediction>(post("/extract/relations", relations_request(doc, events)),
                                          "/extract/relations");
}

CrossDocPredictions ModelServiceClient::coref_crossdoc(const std::string& cluster_id,
                                                       std::span<const Document> docs,
                                                       std::span<const Event> events) const {
  return json_as<CrossDocPredictions>(
      post("/coref/crossdoc", crossdoc_request(cluster_id, docs, events)), "/coref/crossdoc");
}

IdeologyProbs ModelServiceClient::classify_ideology(std::string_view text) const {
  return json_as<IdeologyProbs>(post("/classify/ideology", ideology_request(text)),
                                "/classify/ideology");
}

ClusterPredictions ModelServiceClient::predict_cluster(const std::string& cluster_id,
                                                       std::vector<Document> docs,
                                                       const ThresholdPolicy& policy) const {
  std::sort(docs.begin(), docs.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  ClusterPredictions out;
  out.crossdoc.cluster_id = cluster_id;
  std::vector<Event> all_events;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    DocumentPredictions dp;
    dp.doc_id = docs[d].doc_id;
    dp.events = extract_events(docs[d]);
    const std::vector<Event> events = decode_events(docs[d], d, dp.events, policy);
    dp.morals = classify_moral(docs[d], events);
    dp.pairs = extract_relations(docs[d], events);
    all_events.insert(all_events.end(), events.begin(), events.end());
    out.documents.push_back(std::move(dp));
  }
  out.crossdoc = coref_crossdoc(cluster_id, docs, all_events);
  if (out.crossdoc.cluster_id != cluster_id) {
    throw SchemaError("/coref/crossdoc answered for cluster '" + out.crossdoc.cluster_id +
                      "', expected '" + cluster_id + "'");
  }
  return out;
}

}  // namespace neutralsum
