#include <algorithm>
#include <atomic>
#include <thread>

#include <gtest/gtest.h>

#include "neutralsum/error.h"
#include "neutralsum/model_service.h"
#include "neutralsum/pipeline.h"
#include "support/test_support.h"

// After Eigen: <resolv.h> defines a _res macro.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace neutralsum {
namespace {

std::filesystem::path service_dir() { return testing::source_dir() / "tests" / "fixtures" / "service"; }

Json service_fixture(const std::string& name) { return read_json_file(service_dir() / name); }

ClusterRecord load_cluster(const std::string& id) {
  return json_as<ClusterRecord>(read_json_file(testing::fixture_dir() / "clusters" / (id + ".json")), id);
}

DocumentPredictions load_predictions(const std::string& cluster, const std::string& doc) {
  return json_as<DocumentPredictions>(
      read_json_file(testing::fixture_dir() / "predictions" / cluster / (doc + ".json")), doc);
}

// Stub model service answering from the end-to-end prediction files.
class FakeService {
 public:
  FakeService() {
    const auto keywords = KeywordIdeologyScorer::load(testing::fixture_dir() / "ideology_keywords.tsv");
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status": "ok"})", "application/json");
    });
    auto per_doc = [this](const char* field, bool nested) {
      return [this, field, nested](const httplib::Request& req, httplib::Response& res) {
        if (fail_next_ > 0) {
          --fail_next_;
          res.status = fail_status_;
          res.set_content(fail_body_, "text/plain");
          return;
        }
        const Json body = Json::parse(req.body);
        const std::string doc_id = nested ? body.at("document").at("doc_id") : body.at("doc_id");
        const Json preds = read_json_file(testing::fixture_dir() / "predictions" / cluster_of(doc_id) /
                                          (doc_id + ".json"));
        res.set_content(Json{{"predictions", preds.at(field)}}.dump(), "application/json");
      };
    };
    server_.Post("/extract/events", per_doc("events", false));
    server_.Post("/classify/moral", per_doc("morals", true));
    server_.Post("/extract/relations", per_doc("pairs", true));
    server_.Post("/coref/crossdoc", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = Json::parse(req.body).at("cluster_id");
      Json j = read_json_file(testing::fixture_dir() / "predictions" / id / "crossdoc.json");
      if (wrong_cluster_) j["cluster_id"] = "other";
      res.set_content(j.dump(), "application/json");
    });
    server_.Post("/classify/ideology", [keywords](const httplib::Request& req, httplib::Response& res) {
      res.set_content(Json(keywords.score(Json::parse(req.body).at("text").get<std::string>())).dump(),
                      "application/json");
    });
    server_.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{not json", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  void fail(int times, int status, std::string body = "busy") {
    fail_next_ = times;
    fail_status_ = status;
    fail_body_ = std::move(body);
  }
  void answer_wrong_cluster() { wrong_cluster_ = true; }

 private:
  static std::string cluster_of(const std::string& doc_id) {
    return doc_id.starts_with("tb_") ? "travel_ban" : "budget_deal";
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> fail_next_{0};
  int fail_status_ = 503;
  std::string fail_body_;
  std::atomic<bool> wrong_cluster_{false};
};

TEST(ServiceSchemaTest, RequestBuildersMatchSharedFixtures) {
  ClusterRecord c = load_cluster("travel_ban");
  std::sort(c.documents.begin(), c.documents.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  const Document& doc = c.documents[0];
  const DocumentPredictions p = load_predictions("travel_ban", doc.doc_id);
  const std::vector<Event> events = decode_events(doc, 0, p.events);
  EXPECT_EQ(events_request(doc), service_fixture("extract_events.request.json"));
  EXPECT_EQ(moral_request(doc, events), service_fixture("classify_moral.request.json"));
  EXPECT_EQ(relations_request(doc, events), service_fixture("extract_relations.request.json"));
  EXPECT_EQ(ideology_request("The travel ban protects security."),
            service_fixture("classify_ideology.request.json"));
  std::vector<Event> all;
  for (std::size_t d = 0; d < c.documents.size(); ++d) {
    const auto ev = decode_events(c.documents[d], d, load_predictions("travel_ban", c.documents[d].doc_id).events);
    all.insert(all.end(), ev.begin(), ev.end());
  }
  EXPECT_EQ(crossdoc_request("travel_ban", c.documents, all),
            service_fixture("coref_crossdoc.request.json"));
}

TEST(ServiceSchemaTest, ResponsesParseIntoPredictionTypes) {
  EXPECT_FALSE(json_as<std::vector<EventPrediction>>(
                   service_fixture("extract_events.response.json").at("predictions"), "events")
                   .empty());
  EXPECT_FALSE(json_as<std::vector<MoralPrediction>>(
                   service_fixture("classify_moral.response.json").at("predictions"), "morals")
                   .empty());
  EXPECT_FALSE(json_as<std::vector<PairPrediction>>(
                   service_fixture("extract_relations.response.json").at("predictions"), "pairs")
                   .empty());
  EXPECT_EQ(json_as<CrossDocPredictions>(service_fixture("coref_crossdoc.response.json"), "x").cluster_id,
            "travel_ban");
  const auto probs = json_as<IdeologyProbs>(service_fixture("classify_ideology.response.json"), "i");
  EXPECT_DOUBLE_EQ(polarization(probs), 0.6);
  EXPECT_THROW(json_as<IdeologyProbs>(Json{{"p_liberal", 0.5}, {"p_center", 0.5}, {"p_conservative", 0.5}},
                                      "i"),
               SchemaError);
  EXPECT_EQ(service_fixture("healthz.response.json").at("status"), "ok");
}

TEST(ModelServiceClientTest, PredictClusterMatchesPredictionFiles) {
  FakeService svc;
  const ModelServiceClient client(svc.url(), 5);
  EXPECT_TRUE(client.healthy());
  ClusterRecord c = load_cluster("travel_ban");
  std::reverse(c.documents.begin(), c.documents.end());
  const ClusterPredictions got = client.predict_cluster("travel_ban", c.documents);
  ASSERT_EQ(got.documents.size(), 3u);
  std::vector<DocumentPredictions> files;
  for (const DocumentPredictions& dp : got.documents) {
    files.push_back(load_predictions("travel_ban", dp.doc_id));
    EXPECT_EQ(Json(dp), Json(files.back())) << dp.doc_id;
  }
  EXPECT_EQ(got.documents[0].doc_id, "tb_center");
  EXPECT_EQ(got.crossdoc.clusters.size(), 1u);
  const MultiDocGraph a = ingest_cluster("travel_ban", c.documents, got.documents);
  const MultiDocGraph b = ingest_cluster("travel_ban", c.documents, files);
  EXPECT_EQ(a, b);
}

TEST(ModelServiceClientTest, ErrorsAreClassified) {
  FakeService svc;
  const ModelServiceClient client(svc.url(), 5);
  const Document doc = load_cluster("travel_ban").documents[0];
  svc.fail(1, 503);
  try {
    client.extract_events(doc);
    FAIL();
  } catch (const RemoteError& e) {
    EXPECT_EQ(e.kind(), RemoteError::Kind::kTransient);
  }
  svc.fail(1, 400, "bad request");
  try {
    client.extract_events(doc);
    FAIL();
  } catch (const RemoteError& e) {
    EXPECT_EQ(e.kind(), RemoteError::Kind::kProtocol);
    EXPECT_NE(std::string(e.what()).find("bad request"), std::string::npos);
  }
  EXPECT_NO_THROW(client.extract_events(doc));
  svc.answer_wrong_cluster();
  EXPECT_THROW(client.predict_cluster("travel_ban", load_cluster("travel_ban").documents), SchemaError);
  const IdeologyProbs p = client.classify_ideology("welfare");
  EXPECT_NEAR(p.p_liberal + p.p_center + p.p_conservative, 1.0, 1e-12);
}

TEST(ModelServiceClientTest, UnreachableServiceIsUnhealthy) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  const ModelServiceClient client("http://127.0.0.1:" + std::to_string(port), 1);
  EXPECT_FALSE(client.healthy());
  EXPECT_THROW(client.classify_ideology("x"), RemoteError);
  EXPECT_THROW(ModelServiceClient(""), ConfigError);
}

TEST(ModelServiceClientTest, PipelineAgainstServiceMatchesFileRun) {
  FakeService svc;
  auto run = [&](bool with_service) {
    PipelineConfig cfg = PipelineConfig::load(testing::fixture_dir() / "config.json");
    const auto out = testing::scratch_dir(with_service ? "svc_run" : "file_run");
    cfg.output_dir = out;
    cfg.cache_dir = out / "cache";
    if (with_service) cfg.model_service_url = svc.url();
    Pipeline(cfg).run({});
    return read_text_file(out / "report.json");
  };
  EXPECT_EQ(run(true), run(false));
}

}  // namespace
}  // namespace neutralsum
