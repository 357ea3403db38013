#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neutralsum/graph.h"

namespace neutralsum {

struct EncoderConfig {
  int d_node = 8;    // event embedding width
  int d_rel = 8;     // relation embedding width
  int d_k = 8;       // attention query/key width
  int n_layers = 2;
  int d_hidden = 16;  // projection hidden width (W_1 rows)
  int d_llm = 16;     // soft prompt width
  std::uint64_t seed = 0;
  bool scale_attention = false;  // divide scores by sqrt(d_k)
  double leaky_slope = 0.2;      // graph-node attention LeakyReLU

  // Throws ConfigError unless every width and n_layers is >= 1.
  void check() const;
};

struct LayerParams {
  Eigen::MatrixXd W_r;  // d_rel x (2*d_node + d_rel)
  Eigen::MatrixXd W_q;  // d_k x d_node
  Eigen::MatrixXd W_k;  // d_k x d_rel
  Eigen::MatrixXd W_v;  // d_node x d_rel
  Eigen::MatrixXd W_g;  // d_node x d_node, graph-node transform
  Eigen::VectorXd a_g;  // 2*d_node, graph-node attention vector
};

// All trainable tensors. The same type carries gradients.
struct EncoderParams {
  Eigen::MatrixXd W_m;             // d_node x 2*d_node
  Eigen::VectorXd b_m;             // d_node
  Eigen::MatrixXd moral_embed;     // d_node x 11, one column per MoralLabel
  Eigen::MatrixXd relation_embed;  // d_rel x 8, one column per RelationLabel
  std::vector<LayerParams> layers;
  Eigen::MatrixXd W_1;  // d_hidden x d_node
  Eigen::VectorXd b_1;  // d_hidden
  Eigen::MatrixXd W_2;  // d_llm x d_hidden
  Eigen::VectorXd b_2;  // d_llm

  static EncoderParams zeros(const EncoderConfig& config);
  // Glorot-uniform weights and zero biases from config.seed. Bit-identical
  // across platforms for a given seed.
  static EncoderParams glorot(const EncoderConfig& config);

  // Calls f(name, tensor) for every tensor in a fixed order; names look like
  // "W_m" or "layer1.W_q".
  template <typename F>
  void for_each(F&& f);
  template <typename F>
  void for_each(F&& f) const;

  std::size_t parameter_count() const;
  // this += alpha * other (shapes must match)
  void add_scaled(const EncoderParams& other, double alpha);
  bool all_finite() const;
  // Throws SchemaError if any tensor's shape disagrees with config.
  void check_shapes(const EncoderConfig& config) const;
};

struct EncoderEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  RelationLabel label = RelationLabel::kCoreference;
};

// Index-based view of a graph for the encoder. Node i is events()[i].
struct EncoderGraph {
  std::size_t n_nodes = 0;
  std::vector<MoralLabel> morals;
  std::vector<EncoderEdge> edges;
};

EncoderGraph make_encoder_graph(const MultiDocGraph& graph);

// d_node x n_nodes, column i is the initial embedding of node i.
using NodeInit = Eigen::MatrixXd;

// Deterministic stand-in for a pretrained text encoder: FNV-1a of the
// lowercased text (mixed with a salt) seeds a SplitMix64 stream of values in
// [-scale, scale].
Eigen::VectorXd hash_embedding(std::string_view text, int dim, std::uint64_t salt = 0,
                               double scale = 1.0);
NodeInit hash_node_init(const MultiDocGraph& graph, int d_node);

// Softmax group of one (node, relation) neighbourhood.
struct AttentionGroup {
  std::size_t node = 0;
  RelationLabel label = RelationLabel::kCoreference;
  std::vector<std::size_t> neighbors;
  std::vector<double> weights;
};

struct ForwardResult {
  // n_layers + 1 entries; [0] is the moral-fused input.
  std::vector<Eigen::MatrixXd> node_embeddings;
  // n_layers + 1 entries; [0] is the mean of node_embeddings[0].
  std::vector<Eigen::VectorXd> graph_embeddings;
  Eigen::VectorXd graph_embedding;  // graph_embeddings.back()
  Eigen::VectorXd soft_prompt;      // projection of graph_embedding, width d_llm
  // Per layer: relation attention groups and graph-node weights over nodes.
  std::vector<std::vector<AttentionGroup>> relation_attention;
  std::vector<Eigen::VectorXd> node_attention;
};

// e_i <- W_m (e_i ++ moral_embed[m]) + b_m
Eigen::VectorXd fuse_moral(const Eigen::VectorXd& e, MoralLabel moral, const EncoderParams& params);

// Throws NumericError (naming layer and node or message) on NaN/Inf and
// SchemaError on shape mismatch.
ForwardResult forward(const EncoderGraph& graph, const NodeInit& init, const EncoderParams& params,
                      const EncoderConfig& config);

// Scalar loss of the soft prompt.
class SoftPromptLoss {
 public:
  virtual ~SoftPromptLoss() = default;
  // Returns the loss; writes dLoss/dSoftPrompt into *grad when non-null.
  virtual double evaluate(const Eigen::VectorXd& soft_prompt, Eigen::VectorXd* grad) const = 0;
};

// sum_i (soft_prompt_i - target_i)^2
class SquaredDistanceLoss : public SoftPromptLoss {
 public:
  explicit SquaredDistanceLoss(Eigen::VectorXd target) : target_(std::move(target)) {}
  double evaluate(const Eigen::VectorXd& soft_prompt, Eigen::VectorXd* grad) const override;

 private:
  Eigen::VectorXd target_;
};

struct GradientResult {
  double loss = 0;
  EncoderParams grads;
};

// Exact reverse-mode gradient of loss(forward(...).soft_prompt).
GradientResult gradient(const EncoderGraph& graph, const NodeInit& init, const EncoderParams& params,
                        const EncoderConfig& config, const SoftPromptLoss& loss);

// Checkpoint: JSON with a format tag, version, config and named tensors with
// shapes. Doubles round-trip exactly.
void save_checkpoint(const std::filesystem::path& path, const EncoderConfig& config,
                     const EncoderParams& params);
struct Checkpoint {
  EncoderConfig config;
  EncoderParams params;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

// --- template definitions ---------------------------------------------------

template <typename F>
void EncoderParams::for_each(F&& f) {
  f(std::string("W_m"), W_m);
  f(std::string("b_m"), b_m);
  f(std::string("moral_embed"), moral_embed);
  f(std::string("relation_embed"), relation_embed);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    f(p + "W_r", layers[l].W_r);
    f(p + "W_q", layers[l].W_q);
    f(p + "W_k", layers[l].W_k);
    f(p + "W_v", layers[l].W_v);
    f(p + "W_g", layers[l].W_g);
    f(p + "a_g", layers[l].a_g);
  }
  f(std::string("W_1"), W_1);
  f(std::string("b_1"), b_1);
  f(std::string("W_2"), W_2);
  f(std::string("b_2"), b_2);
}

template <typename F>
void EncoderParams::for_each(F&& f) const {
  const_cast<EncoderParams*>(this)->for_each(
      [&](const std::string& name, auto& tensor) { f(name, std::as_const(tensor)); });
}

}  // namespace neutralsum
