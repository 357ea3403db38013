#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "neutralsum/error.h"
#include "neutralsum/ingestion.h"
#include "neutralsum/json_io.h"
#include "neutralsum/pipeline.h"
#include "support/test_support.h"

namespace neutralsum {
namespace {

Document make_doc(const std::string& id, const std::string& text) {
  return {id, Ideology::kCenter, text, word_spans(text)};
}

std::vector<EventPrediction> event_preds(const std::string& doc_id, std::vector<double> p_event) {
  std::vector<EventPrediction> out;
  for (std::size_t i = 0; i < p_event.size(); ++i) out.push_back({doc_id, i, p_event[i], 1 - p_event[i]});
  return out;
}

MoralPrediction moral_peak(const std::string& id, MoralLabel label) {
  MoralPrediction m{id, {}};
  m.probs.fill(0.02);
  m.probs[static_cast<std::size_t>(label)] = 0.8;
  return m;
}

TEST(WordSpansTest, SplitsOnPunctuationKeepsInnerJoiners) {
  const std::string text = "U.S. won't re-open, ok?";
  std::vector<std::string> words;
  for (const CharSpan& s : word_spans(text)) words.push_back(text.substr(s.begin, s.end - s.begin));
  EXPECT_EQ(words, (std::vector<std::string>{"U", "S", "won't", "re-open", "ok"}));
  EXPECT_TRUE(word_spans("").empty());
  EXPECT_TRUE(word_spans(" -- ").empty());
}

TEST(DecodeEventsTest, ArgmaxPerToken) {
  const Document d = make_doc("d", "court denied it");
  const auto events = decode_events(d, 0, event_preds("d", {0.8, 0.2, 0.7}));
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].trigger_text, "court");
  EXPECT_EQ(events[0].event_id, "d0e0");
  EXPECT_EQ(events[1].trigger_text, "it");
  EXPECT_EQ(events[1].event_id, "d0e1");
  EXPECT_EQ(events[1].moral, MoralLabel::kNonMoral);
}

TEST(DecodeEventsTest, TieIsNonEvent) {
  const Document d = make_doc("d", "denied");
  EXPECT_TRUE(decode_events(d, 0, event_preds("d", {0.5})).empty());
  EXPECT_EQ(decode_events(d, 0, event_preds("d", {0.9})).size(), 1u);
}

TEST(DecodeEventsTest, ThresholdPolicyDropsWeakEvents) {
  const Document d = make_doc("d", "a b");
  EXPECT_EQ(decode_events(d, 2, event_preds("d", {0.6, 0.95}), {.min_event_probability = 0.9}).size(), 1u);
}

TEST(DecodeEventsTest, SchemaErrors) {
  const Document d = make_doc("d", "a b");
  EXPECT_THROW(decode_events(d, 0, event_preds("d", {0.6})), SchemaError);
  auto wrong_doc = event_preds("x", {0.6, 0.1});
  EXPECT_THROW(decode_events(d, 0, wrong_doc), SchemaError);
  auto bad_sum = event_preds("d", {0.6, 0.1});
  bad_sum[0].p_non_event = 0.5;
  EXPECT_THROW(decode_events(d, 0, bad_sum), SchemaError);
  auto repeated = event_preds("d", {0.6, 0.1});
  repeated[1].token_index = 0;
  EXPECT_THROW(decode_events(d, 0, repeated), SchemaError);
}

TEST(DecorateMoralTest, ArgmaxAndTies) {
  const Document d = make_doc("d", "protect them now");
  auto events = decode_events(d, 0, event_preds("d", {0.9, 0.1, 0.9}));
  MoralPrediction uniform{"d0e1", {}};
  uniform.probs.fill(1.0 / 11);
  events = decorate_moral(events, std::vector{moral_peak("d0e0", MoralLabel::kCare), uniform});
  EXPECT_EQ(events[0].moral, MoralLabel::kCare);
  EXPECT_EQ(events[1].moral, MoralLabel::kCare);
  EXPECT_THROW(decorate_moral(events, std::vector{moral_peak("d0e0", MoralLabel::kCare)}), SchemaError);
}

TEST(DecodeRelationsTest, PerFamilyArgmax) {
  const Document d = make_doc("d", "a b c");
  const auto events = decode_events(d, 0, event_preds("d", {0.9, 0.9, 0.9}));
  PairPrediction after{"d0e0", "d0e1"};
  after.temporal_probs = {0.1, 0.6, 0.2, 0.1};
  PairPrediction none{"d0e0", "d0e2"};
  PairPrediction two{"d0e1", "d0e2"};
  two.coref_probs = {0.7, 0.3};
  two.causal_probs = {0.5, 0.2, 0.3};
  const auto rel = decode_relations(std::vector{after, none, two}, events);
  ASSERT_EQ(rel.size(), 3u);
  EXPECT_EQ(rel[0].label, RelationLabel::kAfter);
  EXPECT_EQ(rel[1].label, RelationLabel::kCoreference);
  EXPECT_EQ(rel[2].label, RelationLabel::kCauses);
  EXPECT_EQ(rel[2].scope, EdgeScope::kInDoc);
}

TEST(DecodeRelationsTest, RejectsBackwardPairsAndBadVectors) {
  const Document d = make_doc("d", "a b");
  const auto events = decode_events(d, 0, event_preds("d", {0.9, 0.9}));
  EXPECT_THROW(decode_relations(std::vector{PairPrediction{"d0e1", "d0e0"}}, events), SchemaError);
  EXPECT_THROW(decode_relations(std::vector{PairPrediction{"d0e0", "d0e9"}}, events), SchemaError);
  PairPrediction bad{"d0e0", "d0e1"};
  bad.causal_probs = {0.5, 0.5, 0.5};
  EXPECT_THROW(decode_relations(std::vector{bad}, events), SchemaError);
}

TEST(DistributionTest, ToleranceAndArgmax) {
  const double ok[] = {0.5, 0.5 + 5e-7};
  EXPECT_NO_THROW(check_distribution(ok, "x"));
  const double off[] = {0.5, 0.5 + 5e-6};
  EXPECT_THROW(check_distribution(off, "x"), SchemaError);
  const double neg[] = {1.2, -0.2};
  EXPECT_THROW(check_distribution(neg, "x"), SchemaError);
  const double tie[] = {0.3, 0.3, 0.4, 0.4};
  EXPECT_EQ(argmax(tie), 2u);
}

struct Triplet {
  std::vector<Document> docs{make_doc("a", "court reinstated ban"), make_doc("b", "ban reinstated"),
                             make_doc("c", "the reinstatement")};
  std::vector<DocumentPredictions> preds{
      {"a", event_preds("a", {0.1, 0.9, 0.1}), {moral_peak("d0e0", MoralLabel::kAuthority)}, {}},
      {"b", event_preds("b", {0.1, 0.9}), {moral_peak("d1e0", MoralLabel::kNonMoral)}, {}},
      {"c", event_preds("c", {0.1, 0.9}), {moral_peak("d2e0", MoralLabel::kNonMoral)}, {}}};
};

TEST(AttachCrossdocTest, ChainAndPartition) {
  Triplet t;
  const MultiDocGraph g = ingest_cluster("k", t.docs, t.preds);
  const MultiDocGraph joined = attach_crossdoc(g, std::vector{CrossDocCluster{{"d2e0", "d0e0", "d1e0"}}});
  ASSERT_EQ(joined.relations().size(), 2u);
  EXPECT_EQ(joined.relations()[0].source, "d0e0");
  EXPECT_EQ(joined.relations()[0].target, "d1e0");
  EXPECT_EQ(joined.relations()[1].source, "d1e0");
  EXPECT_EQ(joined.relations()[1].target, "d2e0");
  EXPECT_EQ(joined.relations()[0].scope, EdgeScope::kCrossDoc);
  ASSERT_EQ(joined.coref_partition().size(), 1u);
  EXPECT_EQ(joined.coref_partition()[0].size(), 3u);
  EXPECT_TRUE(validate(joined).ok());
  EXPECT_EQ(attach_crossdoc(g, {}), g);
  EXPECT_THROW(attach_crossdoc(g, std::vector{CrossDocCluster{{"d0e0", "d7e7"}}}), SchemaError);
}

TEST(AttachCrossdocTest, OverlappingClustersMerge) {
  Triplet t;
  const MultiDocGraph g = ingest_cluster("k", t.docs, t.preds);
  const MultiDocGraph joined = attach_crossdoc(
      g, std::vector{CrossDocCluster{{"d0e0", "d1e0"}}, CrossDocCluster{{"d1e0", "d2e0"}}});
  ASSERT_EQ(joined.coref_partition().size(), 1u);
  EXPECT_EQ(joined.coref_partition()[0], (CorefClass{"d0e0", "d1e0", "d2e0"}));
}

TEST(IngestClusterTest, MissingPredictionsRejected) {
  Triplet t;
  t.preds.pop_back();
  EXPECT_THROW(ingest_cluster("k", t.docs, t.preds), SchemaError);
}

TEST(IngestClusterTest, DisjointClustersReproducedAsPartition) {
  testing::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Document> docs;
    std::vector<DocumentPredictions> preds;
    std::vector<std::vector<std::string>> ids(3);
    for (int d = 0; d < 3; ++d) {
      const std::string id = std::string(1, static_cast<char>('a' + d));
      docs.push_back(make_doc(id, "w w w w w"));
      std::vector<double> p;
      for (int k = 0; k < 5; ++k) p.push_back(rng.coin(0.6) ? 0.9 : 0.1);
      preds.push_back({id, event_preds(id, p), {}, {}});
      for (int k = 0, e = 0; k < 5; ++k) {
        if (p[static_cast<std::size_t>(k)] > 0.5) {
          const std::string eid = make_event_id(static_cast<std::size_t>(d), static_cast<std::size_t>(e++));
          ids[static_cast<std::size_t>(d)].push_back(eid);
          preds.back().morals.push_back(moral_peak(eid, MoralLabel::kNonMoral));
        }
      }
    }
    // Pair the k-th events across documents into disjoint clusters.
    std::vector<CrossDocCluster> clusters;
    std::set<std::set<std::string>> expected;
    for (std::size_t k = 0;; ++k) {
      std::vector<std::string> members;
      for (const auto& doc_ids : ids) {
        if (k < doc_ids.size()) members.push_back(doc_ids[k]);
      }
      if (members.size() < 2) break;
      clusters.push_back({members});
      expected.emplace(members.begin(), members.end());
    }
    const MultiDocGraph g = attach_crossdoc(ingest_cluster("k", docs, preds), clusters);
    std::set<std::set<std::string>> got;
    for (const auto& c : g.coref_partition()) got.emplace(c.begin(), c.end());
    ASSERT_EQ(got, expected);
  }
}

TEST(PredictionJsonTest, SchemaRoundTripAndErrors) {
  PairPrediction p{"d0e0", "d0e1"};
  p.subevent_probs = {0.6, 0.3, 0.1};
  const Json j = p;
  EXPECT_EQ(j.at("temporal_probs").size(), 4u);
  const auto back = j.get<PairPrediction>();
  EXPECT_EQ(back.subevent_probs, p.subevent_probs);
  Json bad = j;
  bad["coref_probs"] = {1.0};
  EXPECT_THROW(json_as<PairPrediction>(bad, "pair"), SchemaError);
  Json moral = moral_peak("x", MoralLabel::kCare);
  moral["probs"].erase(0);
  EXPECT_THROW(json_as<MoralPrediction>(moral, "moral"), SchemaError);
}

// Decoding the fixture twice, with prediction lists shuffled, gives the same bytes.
TEST(DecodeDeterminismTest, FixtureGraphJsonIsByteStable) {
  const auto dir = testing::fixture_dir();
  for (const std::string cluster_id : {"travel_ban", "budget_deal"}) {
    const auto cluster = read_json_file(dir / "clusters" / (cluster_id + ".json")).get<ClusterRecord>();
    std::vector<DocumentPredictions> preds;
    for (const Document& d : cluster.documents) {
      preds.push_back(read_json_file(dir / "predictions" / cluster_id / (d.doc_id + ".json"))
                          .get<DocumentPredictions>());
    }
    const auto cross = read_json_file(dir / "predictions" / cluster_id / "crossdoc.json")
                           .get<CrossDocPredictions>();
    auto build = [&](std::vector<DocumentPredictions> p) {
      return dump_json(graph_to_json(
          attach_crossdoc(ingest_cluster(cluster_id, cluster.documents, p), cross.clusters)));
    };
    const std::string first = build(preds);
    std::reverse(preds.begin(), preds.end());
    for (auto& p : preds) {
      std::reverse(p.events.begin(), p.events.end());
      std::reverse(p.pairs.begin(), p.pairs.end());
    }
    EXPECT_EQ(build(preds), first);
    const MultiDocGraph g = graph_from_json(Json::parse(first));
    EXPECT_TRUE(validate(g, {.strict_neus = true}).ok());
  }
}

TEST(DecodeDeterminismTest, ProtectCarriesCare) {
  const auto dir = testing::fixture_dir();
  const auto cluster = read_json_file(dir / "clusters" / "travel_ban.json").get<ClusterRecord>();
  std::vector<DocumentPredictions> preds;
  for (const Document& d : cluster.documents) {
    preds.push_back(read_json_file(dir / "predictions" / "travel_ban" / (d.doc_id + ".json"))
                        .get<DocumentPredictions>());
  }
  const MultiDocGraph g = ingest_cluster("travel_ban", cluster.documents, preds);
  bool found = false;
  for (const Event& e : g.events()) {
    if (e.trigger_text == "protect") {
      EXPECT_EQ(e.moral, MoralLabel::kCare);
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

}  // namespace
}  // namespace neutralsum
