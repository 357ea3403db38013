#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "neutralsum/encoder.h"
#include "neutralsum/error.h"
#include "neutralsum/json_io.h"
#include "support/test_support.h"

namespace neutralsum {
namespace {

using testing::EncoderCase;
using testing::Rng;

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.d_node = c.d_rel = c.d_k = c.d_hidden = c.d_llm = 2;
  c.n_layers = 1;
  return c;
}

// Two nodes, one "causes" edge from node 0 to node 1, hand-sized params.
struct HandCase {
  EncoderConfig config = tiny_config();
  EncoderGraph graph{2, {MoralLabel::kNonMoral, MoralLabel::kCare}, {{0, 1, RelationLabel::kCauses}}};
  NodeInit init{2, 2};
  EncoderParams params = EncoderParams::zeros(config);

  HandCase() {
    init << 1, 3,
            2, -1;
    params.W_m << 1, 0, 0, 0,
                  0, 1, 0, 0;
    params.relation_embed.col(static_cast<Eigen::Index>(RelationLabel::kCauses)) << 0.5, -0.5;
    LayerParams& l = params.layers[0];
    l.W_r << 1, 0, 1, 0, 0, 1,
             0, 1, 0, 1, 1, 0;
    l.W_q << 1, 0,
             0, 1;
    l.W_k << 1, 0,
             0, 1;
    l.W_v << 2, 0,
             0, 1;
    l.W_g = Eigen::MatrixXd::Identity(2, 2);
    l.a_g << 1, 0, 0, 1;
    params.W_1 = Eigen::MatrixXd::Identity(2, 2);
    params.W_2 = Eigen::MatrixXd::Identity(2, 2);
    params.b_2 << 0.1, 0;
  }
};

TEST(FuseMoralTest, ZeroAndIdentityBlocks) {
  EncoderConfig c = tiny_config();
  c.d_node = 3;
  EncoderParams p = EncoderParams::glorot(c);
  const Eigen::Vector3d e(0.3, -1.2, 2.0);
  p.W_m.setZero();
  p.b_m.setZero();
  EXPECT_TRUE(fuse_moral(e, MoralLabel::kHarm, p).isZero(0));
  p.W_m.leftCols(3) = Eigen::Matrix3d::Identity();
  EXPECT_EQ(fuse_moral(e, MoralLabel::kHarm, p), Eigen::VectorXd(e));
}

TEST(FuseMoralTest, MatchesElementwiseOracle) {
  Rng rng(5);
  EncoderConfig c = tiny_config();
  c.d_node = 3;
  c.seed = 9;
  const EncoderParams p = EncoderParams::glorot(c);
  Eigen::VectorXd e(3);
  e << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
  const auto m = MoralLabel::kLoyalty;
  const Eigen::VectorXd got = fuse_moral(e, m, p);
  for (int i = 0; i < 3; ++i) {
    double acc = p.b_m(i);
    for (int k = 0; k < 3; ++k) acc += p.W_m(i, k) * e(k);
    for (int k = 0; k < 3; ++k) acc += p.W_m(i, 3 + k) * p.moral_embed(k, static_cast<int>(m));
    EXPECT_NEAR(got(i), acc, 1e-15);
  }
  EXPECT_THROW(fuse_moral(Eigen::VectorXd::Zero(2), m, p), SchemaError);
}

TEST(ForwardTest, HandComputedCausesStep) {
  HandCase h;
  const ForwardResult r = forward(h.graph, h.init, h.params, h.config);
  // r_01 = W_r [e0; rel; e1] = (0.5, 4.5); node 0 gets W_v r / 8, node 1 nothing.
  ASSERT_EQ(r.node_embeddings.size(), 2u);
  EXPECT_NEAR(r.node_embeddings[1](0, 0), 0.125, 1e-15);
  EXPECT_NEAR(r.node_embeddings[1](1, 0), 0.5625, 1e-15);
  EXPECT_EQ(r.node_embeddings[1].col(1), Eigen::Vector2d::Zero());
  ASSERT_EQ(r.relation_attention[0].size(), 1u);
  EXPECT_EQ(r.relation_attention[0][0].node, 0u);
  EXPECT_EQ(r.relation_attention[0][0].label, RelationLabel::kCauses);
  EXPECT_EQ(r.relation_attention[0][0].weights, std::vector<double>{1.0});
  // Graph node: h0 = (2, 0.5); scores 4 and 1.
  const double b0 = std::exp(3.0) / (std::exp(3.0) + 1.0);
  const double b1 = 1.0 / (std::exp(3.0) + 1.0);
  EXPECT_NEAR(r.graph_embeddings[0](0), 2.0, 1e-15);
  EXPECT_NEAR(r.node_attention[0](0), b0, 1e-15);
  EXPECT_NEAR(r.node_attention[0](1), b1, 1e-15);
  EXPECT_NEAR(r.graph_embedding(0), b0 * 1 + b1 * 3, 1e-14);
  EXPECT_NEAR(r.graph_embedding(1), b0 * 2 - b1 * 1, 1e-14);
  EXPECT_NEAR(r.soft_prompt(0), b0 + 3 * b1 + 0.1, 1e-14);
}

TEST(ForwardTest, CoreferenceSendsBothWays) {
  HandCase h;
  h.graph.edges[0].label = RelationLabel::kCoreference;
  const ForwardResult r = forward(h.graph, h.init, h.params, h.config);
  EXPECT_EQ(r.relation_attention[0].size(), 2u);
  EXPECT_FALSE(r.node_embeddings[1].col(1).isZero(0));
}

TEST(ForwardTest, SingleNodeNoEdges) {
  EncoderConfig c = tiny_config();
  c.seed = 3;
  const EncoderParams p = EncoderParams::glorot(c);
  EncoderGraph g{1, {MoralLabel::kNonMoral}, {}};
  NodeInit init(2, 1);
  init << 0.4, -0.7;
  const ForwardResult r = forward(g, init, p, c);
  EXPECT_TRUE(r.node_embeddings[1].isZero(0));
  EXPECT_EQ(r.node_attention[0](0), 1.0);
  EXPECT_TRUE(r.graph_embedding.isApprox(p.layers[0].W_g * r.node_embeddings[0].col(0), 1e-15));
}

TEST(ForwardTest, ZeroProjectionGivesBias) {
  Rng rng(1);
  EncoderCase c = testing::random_encoder_case(rng, 3, 5, 4, 6);
  c.params.W_2.setZero();
  c.params.b_2.setRandom();
  EXPECT_EQ(forward(c.graph, c.init, c.params, c.config).soft_prompt, c.params.b_2);
}

TEST(ForwardTest, NonFiniteInputIsLocated) {
  HandCase h;
  h.init(0, 1) = std::nan("");
  try {
    forward(h.graph, h.init, h.params, h.config);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("node 1"), std::string::npos) << e.what();
  }
}

TEST(ForwardTest, ShapeErrors) {
  HandCase h;
  EXPECT_THROW(forward(h.graph, NodeInit::Zero(3, 2), h.params, h.config), SchemaError);
  EncoderGraph bad = h.graph;
  bad.edges.push_back({0, 5, RelationLabel::kBefore});
  EXPECT_THROW(forward(bad, h.init, h.params, h.config), SchemaError);
  EncoderConfig zero = h.config;
  zero.n_layers = 0;
  EXPECT_THROW(zero.check(), ConfigError);
}

TEST(GradientTest, ZeroParamsZeroTargetIsStationary) {
  Rng rng(2);
  EncoderCase c = testing::random_encoder_case(rng, 3, 5, 4, 6);
  c.params = EncoderParams::zeros(c.config);
  const SquaredDistanceLoss loss(Eigen::VectorXd::Zero(c.config.d_llm));
  const GradientResult g = gradient(c.graph, c.init, c.params, c.config, loss);
  EXPECT_EQ(g.loss, 0.0);
  g.grads.for_each([](const std::string& name, const auto& t) { EXPECT_TRUE(t.isZero(0)) << name; });
}

TEST(GradientTest, DeadPathsGetExactZeros) {
  Rng rng(4);
  EncoderCase c = testing::random_encoder_case(rng, 3, 5, 4, 6);
  c.graph.edges.clear();
  Eigen::VectorXd target(c.config.d_llm);
  target.setConstant(0.7);
  const GradientResult g = gradient(c.graph, c.init, c.params, c.config, SquaredDistanceLoss(target));
  for (const LayerParams& l : g.grads.layers) {
    EXPECT_TRUE(l.W_v.isZero(0));
    EXPECT_TRUE(l.W_r.isZero(0));
    EXPECT_TRUE(l.W_q.isZero(0));
  }
  EXPECT_TRUE(g.grads.relation_embed.isZero(0));
  EXPECT_FALSE(g.grads.W_m.isZero(0));
}

TEST(GradientTest, MatchesCentralDifferences) {
  Rng rng(20261015);
  for (int i = 0; i < 20; ++i) {
    const EncoderCase c = testing::random_encoder_case(rng, 3, 8, 4, 8);
    Eigen::VectorXd target(c.config.d_llm);
    for (Eigen::Index k = 0; k < target.size(); ++k) target(k) = rng.uniform(-1, 1);
    for (const auto& b : testing::gradient_check(c, SquaredDistanceLoss(target))) {
      EXPECT_LE(b.relative_error, 1e-4) << "case " << i << " block " << b.name;
    }
  }
}

TEST(GradientTest, LossValueMatchesForward) {
  Rng rng(6);
  const EncoderCase c = testing::random_encoder_case(rng, 3, 6, 4, 6);
  const Eigen::VectorXd target = Eigen::VectorXd::Ones(c.config.d_llm);
  const SquaredDistanceLoss loss(target);
  const double direct = (forward(c.graph, c.init, c.params, c.config).soft_prompt - target).squaredNorm();
  EXPECT_DOUBLE_EQ(gradient(c.graph, c.init, c.params, c.config, loss).loss, direct);
}

TEST(AttentionPropertyTest, SoftmaxGroupsSumToOne) {
  Rng rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const EncoderCase c = testing::random_encoder_case(rng, 1, 8, 2, 8);
    const ForwardResult r = forward(c.graph, c.init, c.params, c.config);
    for (const auto& layer : r.relation_attention) {
      for (const AttentionGroup& g : layer) {
        const double s = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
        ASSERT_NEAR(s, 1.0, 1e-9);
      }
    }
    for (const Eigen::VectorXd& beta : r.node_attention) ASSERT_NEAR(beta.sum(), 1.0, 1e-9);
  }
}

EncoderCase permuted(const EncoderCase& c, const std::vector<std::size_t>& perm) {
  EncoderCase out = c;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.graph.morals[perm[i]] = c.graph.morals[i];
    out.init.col(static_cast<Eigen::Index>(perm[i])) = c.init.col(static_cast<Eigen::Index>(i));
  }
  for (EncoderEdge& e : out.graph.edges) {
    e.source = perm[e.source];
    e.target = perm[e.target];
  }
  return out;
}

TEST(PermutationPropertyTest, GraphEmbeddingInvariant) {
  Rng rng(100);
  for (int i = 0; i < 100; ++i) {
    const EncoderCase c = testing::random_encoder_case(rng, 2, 8, 4, 8);
    std::vector<std::size_t> perm(c.graph.n_nodes);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    const EncoderCase p = permuted(c, perm);
    const ForwardResult a = forward(c.graph, c.init, c.params, c.config);
    const ForwardResult b = forward(p.graph, p.init, p.params, p.config);
    ASSERT_LE((a.graph_embedding - b.graph_embedding).cwiseAbs().maxCoeff(), 1e-9) << "case " << i;
    // Node embeddings are equivariant.
    for (std::size_t k = 0; k < perm.size(); ++k) {
      ASSERT_LE((a.node_embeddings.back().col(static_cast<Eigen::Index>(k)) -
                 b.node_embeddings.back().col(static_cast<Eigen::Index>(perm[k])))
                    .cwiseAbs()
                    .maxCoeff(),
                1e-9);
    }
  }
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  Rng rng(12);
  const EncoderCase c = testing::random_encoder_case(rng, 3, 4, 4, 6);
  const auto dir = testing::scratch_dir("ckpt");
  save_checkpoint(dir / "ck.json", c.config, c.params);
  const Checkpoint back = load_checkpoint(dir / "ck.json");
  EXPECT_EQ(back.config.d_node, c.config.d_node);
  EXPECT_EQ(back.config.scale_attention, c.config.scale_attention);
  std::vector<Eigen::VectorXd> a;
  std::vector<Eigen::VectorXd> b;
  c.params.for_each([&](const std::string&, const auto& t) {
    a.push_back(Eigen::Map<const Eigen::VectorXd>(t.data(), t.size()));
  });
  back.params.for_each([&](const std::string&, const auto& t) {
    b.push_back(Eigen::Map<const Eigen::VectorXd>(t.data(), t.size()));
  });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
}

TEST(CheckpointTest, RejectsForeignAndMisshapenFiles) {
  const auto dir = testing::scratch_dir("ckpt_bad");
  write_json_file(dir / "x.json", Json{{"format", "other"}, {"version", 1}});
  EXPECT_THROW(load_checkpoint(dir / "x.json"), SchemaError);
  EncoderConfig c = tiny_config();
  save_checkpoint(dir / "ok.json", c, EncoderParams::glorot(c));
  Json j = read_json_file(dir / "ok.json");
  j["tensors"][0]["shape"] = {9, 9};
  write_json_file(dir / "bad.json", j);
  EXPECT_THROW(load_checkpoint(dir / "bad.json"), SchemaError);
}

TEST(GlorotTest, SeededAndShaped) {
  EncoderConfig c;
  c.seed = 42;
  const EncoderParams a = EncoderParams::glorot(c);
  const EncoderParams b = EncoderParams::glorot(c);
  EXPECT_EQ(a.layers[1].W_r, b.layers[1].W_r);
  EXPECT_EQ(a.W_2, b.W_2);
  c.seed = 43;
  EXPECT_NE(EncoderParams::glorot(c).W_2, a.W_2);
  EXPECT_EQ(a.layers.size(), 2u);
  EXPECT_EQ(a.layers[0].W_r.cols(), 2 * c.d_node + c.d_rel);
  EXPECT_NO_THROW(a.check_shapes(c));
  EXPECT_TRUE(a.all_finite());
}

TEST(HashEmbeddingTest, DeterministicCaseInsensitiveBounded) {
  const Eigen::VectorXd a = hash_embedding("Protect", 16);
  EXPECT_EQ(a, hash_embedding("protect", 16));
  EXPECT_NE(a, hash_embedding("protect", 16, 1));
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_NE(a, hash_embedding("ban", 16));
}

TEST(EncoderGraphTest, FromMultiDocGraph) {
  Document d{"d", Ideology::kLeft, "a b", {{0, 1}, {2, 3}}};
  MultiDocGraph g("c", {d},
                  {{"d0e0", "d", {0, 1}, "a", MoralLabel::kCare}, {"d0e1", "d", {2, 3}, "b", MoralLabel::kHarm}},
                  {{"d0e0", "d0e1", RelationLabel::kAfter, EdgeScope::kInDoc}});
  const EncoderGraph eg = make_encoder_graph(g);
  EXPECT_EQ(eg.n_nodes, 2u);
  EXPECT_EQ(eg.morals[1], MoralLabel::kHarm);
  ASSERT_EQ(eg.edges.size(), 1u);
  EXPECT_EQ(eg.edges[0].source, 0u);
  EXPECT_EQ(eg.edges[0].label, RelationLabel::kAfter);
  const NodeInit init = hash_node_init(g, 8);
  EXPECT_EQ(init.col(0), hash_embedding("a", 8));
}

}  // namespace
}  // namespace neutralsum
