#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "neutralsum/error.h"
#include "neutralsum/graph.h"
#include "neutralsum/ingestion.h"

namespace neutralsum {

using Json = nlohmann::json;

struct EncoderConfig;

// nlohmann ADL hooks. Enum and range problems raise SchemaError directly;
// missing keys and type mismatches surface as nlohmann exceptions unless the
// conversion goes through json_as().
void to_json(Json& j, const CharSpan& v);
void from_json(const Json& j, CharSpan& v);
void to_json(Json& j, const Document& v);
void from_json(const Json& j, Document& v);
void to_json(Json& j, const Event& v);
void from_json(const Json& j, Event& v);
void to_json(Json& j, const EventRelation& v);
void from_json(const Json& j, EventRelation& v);
void to_json(Json& j, const GraphStats& v);
void from_json(const Json& j, GraphStats& v);
void to_json(Json& j, const GraphStatsMean& v);
void to_json(Json& j, const EncoderConfig& v);
void from_json(const Json& j, EncoderConfig& v);

void to_json(Json& j, const EventPrediction& v);
void from_json(const Json& j, EventPrediction& v);
void to_json(Json& j, const MoralPrediction& v);
void from_json(const Json& j, MoralPrediction& v);
void to_json(Json& j, const PairPrediction& v);
void from_json(const Json& j, PairPrediction& v);
void to_json(Json& j, const CrossDocCluster& v);
void from_json(const Json& j, CrossDocCluster& v);
void to_json(Json& j, const DocumentPredictions& v);
void from_json(const Json& j, DocumentPredictions& v);
void to_json(Json& j, const CrossDocPredictions& v);
void from_json(const Json& j, CrossDocPredictions& v);

Json graph_to_json(const MultiDocGraph& graph);
MultiDocGraph graph_from_json(const Json& j);

// Converts with SchemaError on failure; `what` names the document in messages.
template <typename T>
T json_as(const Json& j, std::string_view what);

// Two-space indented dump with a trailing newline. Object keys come out
// sorted, so equal values always give equal bytes.
std::string dump_json(const Json& j);

std::string read_text_file(const std::filesystem::path& path);
// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view contents);
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

template <typename T>
T json_as(const Json& j, std::string_view what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

}  // namespace neutralsum
