#include "neutralsum/json_io.h"

#include <fstream>
#include <sstream>
#include <system_error>

namespace neutralsum {

void to_json(Json& j, const CharSpan& v) { j = Json::array({v.begin, v.end}); }

void from_json(const Json& j, CharSpan& v) {
  if (!j.is_array() || j.size() != 2) throw SchemaError("span must be [char_start, char_end]");
  v.begin = j[0].get<std::size_t>();
  v.end = j[1].get<std::size_t>();
}

void to_json(Json& j, const Document& v) {
  j = Json{{"doc_id", v.doc_id},
           {"ideology_tag", to_string(v.ideology_tag)},
           {"text", v.text},
           {"token_spans", v.token_spans}};
}

void from_json(const Json& j, Document& v) {
  v.doc_id = j.at("doc_id").get<std::string>();
  v.ideology_tag = parse_ideology(j.at("ideology_tag").get<std::string>());
  v.text = j.at("text").get<std::string>();
  v.token_spans = j.at("token_spans").get<std::vector<CharSpan>>();
}

void to_json(Json& j, const Event& v) {
  j = Json{{"event_id", v.event_id},
           {"doc_id", v.doc_id},
           {"trigger_span", v.trigger_span},
           {"trigger_text", v.trigger_text},
           {"moral", to_string(v.moral)}};
}

void from_json(const Json& j, Event& v) {
  v.event_id = j.at("event_id").get<std::string>();
  v.doc_id = j.at("doc_id").get<std::string>();
  v.trigger_span = j.at("trigger_span").get<CharSpan>();
  v.trigger_text = j.at("trigger_text").get<std::string>();
  v.moral = parse_moral(j.at("moral").get<std::string>());
}

void to_json(Json& j, const EventRelation& v) {
  j = Json{{"source", v.source},
           {"target", v.target},
           {"label", to_string(v.label)},
           {"scope", to_string(v.scope)}};
}

void from_json(const Json& j, EventRelation& v) {
  v.source = j.at("source").get<std::string>();
  v.target = j.at("target").get<std::string>();
  v.label = parse_relation(j.at("label").get<std::string>());
  v.scope = parse_scope(j.at("scope").get<std::string>());
}

void to_json(Json& j, const GraphStats& v) {
  j = Json{{"n_events", v.n_events},           {"n_moral_events", v.n_moral_events},
           {"n_event_pairs", v.n_event_pairs}, {"n_coref", v.n_coref},
           {"n_temporal", v.n_temporal},       {"n_causal", v.n_causal},
           {"n_subevent", v.n_subevent},       {"n_crossdoc_coref", v.n_crossdoc_coref}};
}

void from_json(const Json& j, GraphStats& v) {
  v.n_events = j.at("n_events").get<std::size_t>();
  v.n_moral_events = j.at("n_moral_events").get<std::size_t>();
  v.n_event_pairs = j.at("n_event_pairs").get<std::size_t>();
  v.n_coref = j.at("n_coref").get<std::size_t>();
  v.n_temporal = j.at("n_temporal").get<std::size_t>();
  v.n_causal = j.at("n_causal").get<std::size_t>();
  v.n_subevent = j.at("n_subevent").get<std::size_t>();
  v.n_crossdoc_coref = j.at("n_crossdoc_coref").get<std::size_t>();
}

void to_json(Json& j, const GraphStatsMean& v) {
  j = Json{{"n_events", v.n_events},           {"n_moral_events", v.n_moral_events},
           {"n_event_pairs", v.n_event_pairs}, {"n_coref", v.n_coref},
           {"n_temporal", v.n_temporal},       {"n_causal", v.n_causal},
           {"n_subevent", v.n_subevent},       {"n_crossdoc_coref", v.n_crossdoc_coref}};
}

void to_json(Json& j, const EventPrediction& v) {
  j = Json{{"doc_id", v.doc_id},
           {"token_index", v.token_index},
           {"p_event", v.p_event},
           {"p_non_event", v.p_non_event}};
}

void from_json(const Json& j, EventPrediction& v) {
  v.doc_id = j.at("doc_id").get<std::string>();
  v.token_index = j.at("token_index").get<std::size_t>();
  v.p_event = j.at("p_event").get<double>();
  v.p_non_event = j.at("p_non_event").get<double>();
}

void to_json(Json& j, const MoralPrediction& v) {
  j = Json{{"event_id", v.event_id}, {"probs", v.probs}};
}

void from_json(const Json& j, MoralPrediction& v) {
  v.event_id = j.at("event_id").get<std::string>();
  const Json& probs = j.at("probs");
  if (!probs.is_array() || probs.size() != kNumMoralLabels) {
    throw SchemaError("moral prediction " + v.event_id + ": probs must have 11 entries");
  }
  v.probs = probs.get<std::array<double, kNumMoralLabels>>();
}

namespace {

template <std::size_t N>
std::array<double, N> fixed_vector(const Json& j, const char* key, const std::string& where) {
  const Json& arr = j.at(key);
  if (!arr.is_array() || arr.size() != N) {
    throw SchemaError(where + ": " + key + " must have " + std::to_string(N) + " entries");
  }
  return arr.get<std::array<double, N>>();
}

}  // namespace

void to_json(Json& j, const PairPrediction& v) {
  j = Json{{"source_event_id", v.source_event_id},
           {"target_event_id", v.target_event_id},
           {"coref_probs", v.coref_probs},
           {"temporal_probs", v.temporal_probs},
           {"causal_probs", v.causal_probs},
           {"subevent_probs", v.subevent_probs}};
}

void from_json(const Json& j, PairPrediction& v) {
  v.source_event_id = j.at("source_event_id").get<std::string>();
  v.target_event_id = j.at("target_event_id").get<std::string>();
  const std::string where = "pair " + v.source_event_id + "->" + v.target_event_id;
  v.coref_probs = fixed_vector<2>(j, "coref_probs", where);
  v.temporal_probs = fixed_vector<4>(j, "temporal_probs", where);
  v.causal_probs = fixed_vector<3>(j, "causal_probs", where);
  v.subevent_probs = fixed_vector<3>(j, "subevent_probs", where);
}

void to_json(Json& j, const CrossDocCluster& v) { j = Json{{"member_event_ids", v.member_event_ids}}; }

void from_json(const Json& j, CrossDocCluster& v) {
  v.member_event_ids = j.at("member_event_ids").get<std::vector<std::string>>();
}

void to_json(Json& j, const DocumentPredictions& v) {
  j = Json{{"doc_id", v.doc_id}, {"events", v.events}, {"morals", v.morals}, {"pairs", v.pairs}};
}

void from_json(const Json& j, DocumentPredictions& v) {
  v.doc_id = j.at("doc_id").get<std::string>();
  v.events = j.at("events").get<std::vector<EventPrediction>>();
  v.morals = j.at("morals").get<std::vector<MoralPrediction>>();
  v.pairs = j.at("pairs").get<std::vector<PairPrediction>>();
}

void to_json(Json& j, const CrossDocPredictions& v) {
  j = Json{{"cluster_id", v.cluster_id}, {"clusters", v.clusters}};
}

void from_json(const Json& j, CrossDocPredictions& v) {
  v.cluster_id = j.at("cluster_id").get<std::string>();
  v.clusters = j.at("clusters").get<std::vector<CrossDocCluster>>();
}

Json graph_to_json(const MultiDocGraph& graph) {
  return Json{{"cluster_id", graph.cluster_id()},
              {"documents", graph.documents()},
              {"events", graph.events()},
              {"relations", graph.relations()},
              {"coref_partition", graph.coref_partition()}};
}

MultiDocGraph graph_from_json(const Json& j) {
  try {
    return MultiDocGraph(j.at("cluster_id").get<std::string>(),
                         j.at("documents").get<std::vector<Document>>(),
                         j.at("events").get<std::vector<Event>>(),
                         j.at("relations").get<std::vector<EventRelation>>(),
                         j.at("coref_partition").get<std::vector<CorefClass>>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("graph: ") + e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move " + tmp.string() + " into place: " + ec.message());
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, dump_json(j));
}

}  // namespace neutralsum
