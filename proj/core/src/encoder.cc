#include "neutralsum/encoder.h"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "neutralsum/error.h"
#include "neutralsum/json_io.h"

namespace neutralsum {
namespace {

// Node update averages over all relation types, present or not.
constexpr double kRelationMean = 1.0 / static_cast<double>(kNumRelationLabels);

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Message {
  std::size_t center;
  std::size_t neighbor;
  RelationLabel label;
};

// Contiguous message range sharing (center, label).
struct Group {
  std::size_t begin;
  std::size_t end;
};

struct LayerTrace {
  Eigen::MatrixXd z;     // (2d + d_rel) x K, message inputs
  Eigen::MatrixXd rr;    // d_rel x K, updated relation embeddings
  Eigen::MatrixXd q;     // d_k x n
  Eigen::MatrixXd keys;  // d_k x K
  Eigen::MatrixXd v;     // d x K
  Eigen::VectorXd alpha;  // K
  Eigen::MatrixXd U;      // d x n, W_g e_i
  Eigen::VectorXd u_g;    // d, W_g h_g
  Eigen::VectorXd t;      // n, pre-activation scores
  Eigen::VectorXd beta;   // n
};

struct Trace {
  std::vector<Message> messages;
  std::vector<Group> groups;
  Eigen::MatrixXd fusion_in;  // 2d x n
  std::vector<LayerTrace> layers;
  Eigen::VectorXd hidden;  // W_1 h_g + b_1
  ForwardResult result;
};

std::vector<Message> build_messages(const EncoderGraph& graph) {
  std::vector<Message> messages;
  messages.reserve(graph.edges.size() * 2);
  for (const EncoderEdge& e : graph.edges) {
    if (e.source >= graph.n_nodes || e.target >= graph.n_nodes) {
      throw SchemaError("encoder edge references node outside the graph");
    }
    messages.push_back({e.source, e.target, e.label});
    if (e.label == RelationLabel::kCoreference) messages.push_back({e.target, e.source, e.label});
  }
  auto key = [](const Message& m) { return std::tuple(m.center, m.label, m.neighbor); };
  std::sort(messages.begin(), messages.end(),
            [&](const Message& a, const Message& b) { return key(a) < key(b); });
  messages.erase(std::unique(messages.begin(), messages.end(),
                             [&](const Message& a, const Message& b) { return key(a) == key(b); }),
                 messages.end());
  return messages;
}

std::vector<Group> build_groups(const std::vector<Message>& messages) {
  std::vector<Group> groups;
  std::size_t start = 0;
  for (std::size_t k = 1; k <= messages.size(); ++k) {
    if (k == messages.size() || messages[k].center != messages[start].center ||
        messages[k].label != messages[start].label) {
      groups.push_back({start, k});
      start = k;
    }
  }
  return groups;
}

void check_columns(const Eigen::MatrixXd& m, const std::string& where, const char* unit) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (!m.col(c).allFinite()) {
      throw NumericError(where + ": non-finite value at " + unit + " " + std::to_string(c));
    }
  }
}

void check_vector(const Eigen::VectorXd& v, const std::string& where) {
  if (!v.allFinite()) throw NumericError(where + ": non-finite value");
}

// In-place numerically stable softmax.
void softmax(Eigen::Ref<Eigen::VectorXd> x) {
  if (x.size() == 0) return;
  const double m = x.maxCoeff();
  x = (x.array() - m).exp();
  x /= x.sum();
}

Trace run_forward(const EncoderGraph& graph, const NodeInit& init, const EncoderParams& p,
                  const EncoderConfig& cfg) {
  cfg.check();
  p.check_shapes(cfg);
  const auto n = static_cast<Eigen::Index>(graph.n_nodes);
  const Eigen::Index d = cfg.d_node;
  const Eigen::Index dr = cfg.d_rel;
  if (graph.morals.size() != graph.n_nodes) throw SchemaError("one moral label per node required");
  if (init.rows() != d || init.cols() != n) {
    throw SchemaError("node init must be d_node x n_nodes");
  }

  Trace tr;
  tr.messages = build_messages(graph);
  tr.groups = build_groups(tr.messages);
  const auto K = static_cast<Eigen::Index>(tr.messages.size());
  const double score_scale = cfg.scale_attention ? 1.0 / std::sqrt(static_cast<double>(cfg.d_k)) : 1.0;

  tr.fusion_in.resize(2 * d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    tr.fusion_in.col(i).head(d) = init.col(i);
    tr.fusion_in.col(i).tail(d) = p.moral_embed.col(static_cast<Eigen::Index>(graph.morals[i]));
  }
  Eigen::MatrixXd e0 = p.W_m * tr.fusion_in;
  e0.colwise() += p.b_m;
  check_columns(e0, "moral fusion", "node");

  ForwardResult& out = tr.result;
  out.graph_embeddings.push_back(n > 0 ? Eigen::VectorXd(e0.rowwise().mean())
                                       : Eigen::VectorXd::Zero(d));
  out.node_embeddings.push_back(std::move(e0));

  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerParams& P = p.layers[l];
    const Eigen::MatrixXd& E = out.node_embeddings.back();
    const Eigen::VectorXd& hg_prev = out.graph_embeddings.back();
    const std::string where = "layer " + std::to_string(l + 1);
    LayerTrace lt;

    // Relation update and per-relation attention.
    lt.z.resize(2 * d + dr, K);
    for (Eigen::Index k = 0; k < K; ++k) {
      const Message& m = tr.messages[k];
      lt.z.col(k).head(d) = E.col(static_cast<Eigen::Index>(m.center));
      lt.z.col(k).segment(d, dr) = p.relation_embed.col(static_cast<Eigen::Index>(m.label));
      lt.z.col(k).tail(d) = E.col(static_cast<Eigen::Index>(m.neighbor));
    }
    lt.rr = P.W_r * lt.z;
    check_columns(lt.rr, where + " relation update", "message");
    lt.q = P.W_q * E;
    lt.keys = P.W_k * lt.rr;
    lt.v = P.W_v * lt.rr;
    lt.alpha.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      lt.alpha(k) = score_scale * lt.q.col(static_cast<Eigen::Index>(tr.messages[k].center))
                                      .dot(lt.keys.col(k));
    }
    check_vector(lt.alpha, where + " attention scores");
    std::vector<AttentionGroup> groups;
    groups.reserve(tr.groups.size());
    for (const Group& g : tr.groups) {
      const auto len = static_cast<Eigen::Index>(g.end - g.begin);
      softmax(lt.alpha.segment(static_cast<Eigen::Index>(g.begin), len));
      AttentionGroup ag;
      ag.node = tr.messages[g.begin].center;
      ag.label = tr.messages[g.begin].label;
      for (std::size_t k = g.begin; k < g.end; ++k) {
        ag.neighbors.push_back(tr.messages[k].neighbor);
        ag.weights.push_back(lt.alpha(static_cast<Eigen::Index>(k)));
      }
      groups.push_back(std::move(ag));
    }

    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(d, n);
    for (Eigen::Index k = 0; k < K; ++k) {
      next.col(static_cast<Eigen::Index>(tr.messages[k].center)) += lt.alpha(k) * lt.v.col(k);
    }
    next *= kRelationMean;
    check_columns(next, where + " node update", "node");

    // Graph node attends over the previous layer's event embeddings.
    lt.U = P.W_g * E;
    lt.u_g = P.W_g * hg_prev;
    Eigen::VectorXd hg = Eigen::VectorXd::Zero(d);
    lt.t.resize(n);
    lt.beta.resize(n);
    if (n > 0) {
      const double shared = P.a_g.head(d).dot(lt.u_g);
      lt.t = (P.a_g.tail(d).transpose() * lt.U).transpose().array() + shared;
      lt.beta = lt.t.unaryExpr([&](double x) { return x > 0 ? x : cfg.leaky_slope * x; });
      softmax(lt.beta);
      hg = lt.U * lt.beta;
    }
    check_vector(lt.beta, where + " graph-node attention");
    check_vector(hg, where + " graph embedding");

    out.relation_attention.push_back(std::move(groups));
    out.node_attention.push_back(lt.beta);
    out.node_embeddings.push_back(std::move(next));
    out.graph_embeddings.push_back(std::move(hg));
    tr.layers.push_back(std::move(lt));
  }

  out.graph_embedding = out.graph_embeddings.back();
  tr.hidden = p.W_1 * out.graph_embedding + p.b_1;
  out.soft_prompt = p.W_2 * tr.hidden + p.b_2;
  check_vector(out.soft_prompt, "projection");
  return tr;
}

void fill_glorot(Eigen::MatrixXd& m, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
  }
}

void fill_glorot(Eigen::VectorXd& v, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(v.size() + 1));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = (2.0 * rng.uniform() - 1.0) * limit;
}

}  // namespace

void EncoderConfig::check() const {
  if (d_node < 1 || d_rel < 1 || d_k < 1 || d_hidden < 1 || d_llm < 1) {
    throw ConfigError("encoder widths must be >= 1");
  }
  if (n_layers < 1) throw ConfigError("encoder needs at least one layer");
}

EncoderParams EncoderParams::zeros(const EncoderConfig& c) {
  c.check();
  EncoderParams p;
  p.W_m = Eigen::MatrixXd::Zero(c.d_node, 2 * c.d_node);
  p.b_m = Eigen::VectorXd::Zero(c.d_node);
  p.moral_embed = Eigen::MatrixXd::Zero(c.d_node, kNumMoralLabels);
  p.relation_embed = Eigen::MatrixXd::Zero(c.d_rel, kNumRelationLabels);
  p.layers.resize(static_cast<std::size_t>(c.n_layers));
  for (LayerParams& l : p.layers) {
    l.W_r = Eigen::MatrixXd::Zero(c.d_rel, 2 * c.d_node + c.d_rel);
    l.W_q = Eigen::MatrixXd::Zero(c.d_k, c.d_node);
    l.W_k = Eigen::MatrixXd::Zero(c.d_k, c.d_rel);
    l.W_v = Eigen::MatrixXd::Zero(c.d_node, c.d_rel);
    l.W_g = Eigen::MatrixXd::Zero(c.d_node, c.d_node);
    l.a_g = Eigen::VectorXd::Zero(2 * c.d_node);
  }
  p.W_1 = Eigen::MatrixXd::Zero(c.d_hidden, c.d_node);
  p.b_1 = Eigen::VectorXd::Zero(c.d_hidden);
  p.W_2 = Eigen::MatrixXd::Zero(c.d_llm, c.d_hidden);
  p.b_2 = Eigen::VectorXd::Zero(c.d_llm);
  return p;
}

EncoderParams EncoderParams::glorot(const EncoderConfig& c) {
  EncoderParams p = zeros(c);
  SplitMix64 rng(c.seed);
  p.for_each([&](const std::string& name, auto& tensor) {
    if (name.starts_with("b_")) return;  // biases stay zero
    fill_glorot(tensor, rng);
  });
  return p;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

void EncoderParams::add_scaled(const EncoderParams& other, double alpha) {
  std::vector<const double*> src;
  std::vector<Eigen::Index> sizes;
  other.for_each([&](const std::string&, const auto& t) {
    src.push_back(t.data());
    sizes.push_back(t.size());
  });
  std::size_t i = 0;
  for_each([&](const std::string& name, auto& t) {
    if (i >= src.size() || sizes[i] != t.size()) {
      throw SchemaError("add_scaled: parameter shape mismatch at " + name);
    }
    Eigen::Map<const Eigen::VectorXd> rhs(src[i], sizes[i]);
    Eigen::Map<Eigen::VectorXd>(t.data(), t.size()) += alpha * rhs;
    ++i;
  });
}

bool EncoderParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

void EncoderParams::check_shapes(const EncoderConfig& config) const {
  const EncoderParams ref = zeros(config);
  if (layers.size() != ref.layers.size()) {
    throw SchemaError("encoder params have " + std::to_string(layers.size()) + " layers, config has " +
                      std::to_string(ref.layers.size()));
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  ref.for_each([&](const std::string&, const auto& t) { shapes.emplace_back(t.rows(), t.cols()); });
  std::size_t i = 0;
  for_each([&](const std::string& name, const auto& t) {
    if (shapes[i].first != t.rows() || shapes[i].second != t.cols()) {
      throw SchemaError("encoder param " + name + " has shape " + std::to_string(t.rows()) + "x" +
                        std::to_string(t.cols()) + ", expected " + std::to_string(shapes[i].first) +
                        "x" + std::to_string(shapes[i].second));
    }
    ++i;
  });
}

EncoderGraph make_encoder_graph(const MultiDocGraph& graph) {
  EncoderGraph g;
  g.n_nodes = graph.events().size();
  for (const Event& ev : graph.events()) g.morals.push_back(ev.moral);
  for (const EventRelation& r : graph.relations()) {
    auto s = graph.event_index(r.source);
    auto t = graph.event_index(r.target);
    if (!s || !t) throw SchemaError("relation " + r.source + "->" + r.target + ": dangling endpoint");
    g.edges.push_back({*s, *t, r.label});
  }
  return g;
}

Eigen::VectorXd hash_embedding(std::string_view text, int dim, std::uint64_t salt, double scale) {
  SplitMix64 rng(fnv1a(text) ^ (salt * 0x9E3779B97F4A7C15ULL));
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = (2.0 * rng.uniform() - 1.0) * scale;
  return v;
}

NodeInit hash_node_init(const MultiDocGraph& graph, int d_node) {
  NodeInit init(d_node, static_cast<Eigen::Index>(graph.events().size()));
  for (std::size_t i = 0; i < graph.events().size(); ++i) {
    init.col(static_cast<Eigen::Index>(i)) = hash_embedding(graph.events()[i].trigger_text, d_node);
  }
  return init;
}

Eigen::VectorXd fuse_moral(const Eigen::VectorXd& e, MoralLabel moral, const EncoderParams& params) {
  const Eigen::Index d = params.b_m.size();
  if (e.size() != d || params.W_m.rows() != d || params.W_m.cols() != 2 * d ||
      params.moral_embed.rows() != d) {
    throw SchemaError("fuse_moral: shape mismatch");
  }
  Eigen::VectorXd in(2 * d);
  in << e, params.moral_embed.col(static_cast<Eigen::Index>(moral));
  return params.W_m * in + params.b_m;
}

ForwardResult forward(const EncoderGraph& graph, const NodeInit& init, const EncoderParams& params,
                      const EncoderConfig& config) {
  return run_forward(graph, init, params, config).result;
}

double SquaredDistanceLoss::evaluate(const Eigen::VectorXd& soft_prompt, Eigen::VectorXd* grad) const {
  if (soft_prompt.size() != target_.size()) throw SchemaError("loss target width mismatch");
  const Eigen::VectorXd diff = soft_prompt - target_;
  if (grad != nullptr) *grad = 2.0 * diff;
  return diff.squaredNorm();
}

GradientResult gradient(const EncoderGraph& graph, const NodeInit& init, const EncoderParams& p,
                        const EncoderConfig& cfg, const SoftPromptLoss& loss) {
  const Trace tr = run_forward(graph, init, p, cfg);
  const ForwardResult& fw = tr.result;
  const auto n = static_cast<Eigen::Index>(graph.n_nodes);
  const Eigen::Index d = cfg.d_node;
  const Eigen::Index dr = cfg.d_rel;
  const auto K = static_cast<Eigen::Index>(tr.messages.size());
  const double score_scale = cfg.scale_attention ? 1.0 / std::sqrt(static_cast<double>(cfg.d_k)) : 1.0;

  GradientResult res;
  Eigen::VectorXd d_soft;
  res.loss = loss.evaluate(fw.soft_prompt, &d_soft);
  if (!std::isfinite(res.loss)) throw NumericError("loss is not finite");
  EncoderParams& g = res.grads;
  g = EncoderParams::zeros(cfg);

  // Projection.
  g.b_2 = d_soft;
  g.W_2 = d_soft * tr.hidden.transpose();
  const Eigen::VectorXd d_hidden = p.W_2.transpose() * d_soft;
  g.b_1 = d_hidden;
  g.W_1 = d_hidden * fw.graph_embedding.transpose();
  Eigen::VectorXd d_hg = p.W_1.transpose() * d_hidden;

  // The last layer's node output never reaches h_g, so its gradient starts at 0.
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(d, n);

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerTrace& lt = tr.layers[static_cast<std::size_t>(l)];
    const LayerParams& P = p.layers[static_cast<std::size_t>(l)];
    LayerParams& G = g.layers[static_cast<std::size_t>(l)];
    const Eigen::MatrixXd& E = fw.node_embeddings[static_cast<std::size_t>(l)];
    const Eigen::VectorXd& hg_prev = fw.graph_embeddings[static_cast<std::size_t>(l)];

    Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(d, n);
    Eigen::VectorXd d_hg_prev = Eigen::VectorXd::Zero(d);

    // Graph node: h_g = U beta, beta = softmax(lrelu(t)), t_i = a1.u_g + a2.U_i.
    if (n > 0) {
      Eigen::MatrixXd dU = d_hg * lt.beta.transpose();
      const Eigen::VectorXd d_beta = lt.U.transpose() * d_hg;
      const double mean_term = lt.beta.dot(d_beta);
      const Eigen::VectorXd d_score = lt.beta.array() * (d_beta.array() - mean_term);
      const Eigen::VectorXd d_t =
          d_score.array() * lt.t.array().unaryExpr([&](double x) { return x > 0 ? 1.0 : cfg.leaky_slope; });
      const double d_t_sum = d_t.sum();
      G.a_g.head(d) += d_t_sum * lt.u_g;
      G.a_g.tail(d) += lt.U * d_t;
      const Eigen::VectorXd d_ug = d_t_sum * P.a_g.head(d);
      dU += P.a_g.tail(d) * d_t.transpose();
      G.W_g += dU * E.transpose() + d_ug * hg_prev.transpose();
      d_in += P.W_g.transpose() * dU;
      d_hg_prev = P.W_g.transpose() * d_ug;
    }

    // Relation-aware attention.
    if (K > 0) {
      Eigen::MatrixXd d_v(d, K);
      Eigen::VectorXd d_alpha(K);
      for (Eigen::Index k = 0; k < K; ++k) {
        const auto c = static_cast<Eigen::Index>(tr.messages[k].center);
        d_v.col(k) = (lt.alpha(k) * kRelationMean) * d_out.col(c);
        d_alpha(k) = kRelationMean * lt.v.col(k).dot(d_out.col(c));
      }
      Eigen::VectorXd d_s(K);
      for (const Group& grp : tr.groups) {
        const auto b = static_cast<Eigen::Index>(grp.begin);
        const auto len = static_cast<Eigen::Index>(grp.end - grp.begin);
        const double mean_term = lt.alpha.segment(b, len).dot(d_alpha.segment(b, len));
        d_s.segment(b, len) =
            lt.alpha.segment(b, len).array() * (d_alpha.segment(b, len).array() - mean_term);
      }
      Eigen::MatrixXd d_q = Eigen::MatrixXd::Zero(cfg.d_k, n);
      Eigen::MatrixXd d_keys(cfg.d_k, K);
      for (Eigen::Index k = 0; k < K; ++k) {
        const auto c = static_cast<Eigen::Index>(tr.messages[k].center);
        d_q.col(c) += (score_scale * d_s(k)) * lt.keys.col(k);
        d_keys.col(k) = (score_scale * d_s(k)) * lt.q.col(c);
      }
      G.W_v += d_v * lt.rr.transpose();
      G.W_k += d_keys * lt.rr.transpose();
      G.W_q += d_q * E.transpose();
      d_in += P.W_q.transpose() * d_q;
      const Eigen::MatrixXd d_rr = P.W_v.transpose() * d_v + P.W_k.transpose() * d_keys;
      G.W_r += d_rr * lt.z.transpose();
      const Eigen::MatrixXd d_z = P.W_r.transpose() * d_rr;
      for (Eigen::Index k = 0; k < K; ++k) {
        const Message& m = tr.messages[k];
        d_in.col(static_cast<Eigen::Index>(m.center)) += d_z.col(k).head(d);
        g.relation_embed.col(static_cast<Eigen::Index>(m.label)) += d_z.col(k).segment(d, dr);
        d_in.col(static_cast<Eigen::Index>(m.neighbor)) += d_z.col(k).tail(d);
      }
    }

    d_out = std::move(d_in);
    d_hg = std::move(d_hg_prev);
  }

  // h_g^(0) is the mean of the fused embeddings.
  if (n > 0) d_out.colwise() += d_hg / static_cast<double>(n);

  g.W_m = d_out * tr.fusion_in.transpose();
  g.b_m = d_out.rowwise().sum();
  const Eigen::MatrixXd d_fusion = p.W_m.transpose() * d_out;
  for (Eigen::Index i = 0; i < n; ++i) {
    g.moral_embed.col(static_cast<Eigen::Index>(graph.morals[static_cast<std::size_t>(i)])) +=
        d_fusion.col(i).tail(d);
  }
  return res;
}

// --- checkpoints -------------------------------------------------------------

namespace {

constexpr std::string_view kCheckpointFormat = "neutralsum-encoder";
constexpr int kCheckpointVersion = 1;

}  // namespace

void to_json(Json& j, const EncoderConfig& c) {
  j = Json{{"d_node", c.d_node},
           {"d_rel", c.d_rel},
           {"d_k", c.d_k},
           {"n_layers", c.n_layers},
           {"d_hidden", c.d_hidden},
           {"d_llm", c.d_llm},
           {"seed", c.seed},
           {"scale_attention", c.scale_attention},
           {"leaky_slope", c.leaky_slope}};
}

void from_json(const Json& j, EncoderConfig& c) {
  c.d_node = j.at("d_node").get<int>();
  c.d_rel = j.at("d_rel").get<int>();
  c.d_k = j.at("d_k").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.d_hidden = j.at("d_hidden").get<int>();
  c.d_llm = j.at("d_llm").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.scale_attention = j.at("scale_attention").get<bool>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
}

void save_checkpoint(const std::filesystem::path& path, const EncoderConfig& config,
                     const EncoderParams& params) {
  params.check_shapes(config);
  Json tensors = Json::array();
  params.for_each([&](const std::string& name, const auto& t) {
    Json data = Json::array();
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
    }
    tensors.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"data", std::move(data)}});
  });
  write_json_file(path, Json{{"format", kCheckpointFormat},
                             {"version", kCheckpointVersion},
                             {"config", config},
                             {"tensors", std::move(tensors)}});
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw SchemaError(path.string() + ": not an encoder checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw SchemaError(path.string() + ": unsupported checkpoint version");
    }
    Checkpoint ck;
    j.at("config").get_to(ck.config);
    ck.params = EncoderParams::zeros(ck.config);
    std::map<std::string, const Json*> by_name;
    for (const Json& t : j.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
    ck.params.for_each([&](const std::string& name, auto& t) {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw SchemaError(path.string() + ": missing tensor " + name);
      const Json& tj = *it->second;
      const auto shape = tj.at("shape").get<std::vector<Eigen::Index>>();
      const Json& data = tj.at("data");
      if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
          data.size() != static_cast<std::size_t>(t.size())) {
        throw SchemaError(path.string() + ": tensor " + name + " has the wrong shape");
      }
      std::size_t i = 0;
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = data[i++].template get<double>();
      }
    });
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace neutralsum
