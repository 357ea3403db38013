#include "neutralsum/mock_lm.h"

#include <cmath>
#include <cstdio>

#include "neutralsum/error.h"
#include "neutralsum/json_io.h"
#include "neutralsum/metrics.h"

namespace neutralsum {

MockLM::MockLM(int d_llm, int d_out, std::uint64_t seed) : seed_(seed) {
  if (d_llm < 1 || d_out < 1) throw ConfigError("mock LM widths must be >= 1");
  const double scale = std::sqrt(3.0 / static_cast<double>(d_llm));
  q_ = hash_embedding("<query>", d_llm, seed, scale);
  W_o_.resize(d_out, d_llm);
  for (int r = 0; r < d_out; ++r) {
    W_o_.row(r) = hash_embedding("<out " + std::to_string(r) + ">", d_llm, seed, scale).transpose();
  }
}

std::vector<Eigen::VectorXd> MockLM::embed_text(std::string_view text) const {
  std::vector<Eigen::VectorXd> out;
  const int d = d_llm();
  const double scale = std::sqrt(3.0 / static_cast<double>(d));
  for (const std::string& tok : tokenize(text)) out.push_back(hash_embedding(tok, d, seed_, scale));
  return out;
}

Eigen::VectorXd MockLM::readout(const Eigen::VectorXd& soft_prompt,
                                std::span<const Eigen::VectorXd> text) const {
  if (soft_prompt.size() != q_.size()) throw SchemaError("soft prompt width does not match the mock LM");
  Eigen::VectorXd pooled = q_.dot(soft_prompt) * soft_prompt;
  for (const Eigen::VectorXd& x : text) pooled += q_.dot(x) * x;
  pooled /= static_cast<double>(text.size() + 1);
  return W_o_ * (soft_prompt + pooled);
}

Eigen::VectorXd MockLM::readout_backward(const Eigen::VectorXd& soft_prompt,
                                         std::span<const Eigen::VectorXd> text,
                                         const Eigen::VectorXd& g) const {
  const Eigen::VectorXd back = W_o_.transpose() * g;
  const Eigen::VectorXd attn = q_ * soft_prompt.dot(back) + q_.dot(soft_prompt) * back;
  return back + attn / static_cast<double>(text.size() + 1);
}

ReadoutLoss::ReadoutLoss(const MockLM& lm, std::vector<Eigen::VectorXd> text, Eigen::VectorXd target)
    : lm_(lm), text_(std::move(text)), target_(std::move(target)) {
  if (target_.size() != lm.d_out()) throw SchemaError("readout target width mismatch");
}

double ReadoutLoss::evaluate(const Eigen::VectorXd& soft_prompt, Eigen::VectorXd* grad) const {
  const Eigen::VectorXd diff = lm_.readout(soft_prompt, text_) - target_;
  if (grad != nullptr) *grad = lm_.readout_backward(soft_prompt, text_, 2.0 * diff);
  return diff.squaredNorm();
}

double batch_loss(std::span<const ToyExample> batch, const EncoderParams& params,
                  const EncoderConfig& config, const MockLM& lm, EncoderParams* grads) {
  if (batch.empty()) throw TrainingError("empty training batch");
  const double w = 1.0 / static_cast<double>(batch.size());
  double total = 0;
  if (grads != nullptr) *grads = EncoderParams::zeros(config);
  for (const ToyExample& ex : batch) {
    const ReadoutLoss loss(lm, lm.embed_text(ex.text), ex.target);
    if (grads == nullptr) {
      total += loss.evaluate(forward(ex.graph, ex.init, params, config).soft_prompt, nullptr);
      continue;
    }
    const GradientResult g = gradient(ex.graph, ex.init, params, config, loss);
    total += g.loss;
    grads->add_scaled(g.grads, w);
  }
  return total * w;
}

TrainResult train_toy(std::span<const ToyExample> batch, const EncoderConfig& config,
                      const MockLM& lm, const TrainOptions& options) {
  if (options.steps < 0 || !(options.learning_rate > 0)) {
    throw ConfigError("training needs steps >= 0 and a positive learning rate");
  }
  TrainResult res;
  res.params = EncoderParams::glorot(config);
  res.loss_trace.reserve(static_cast<std::size_t>(options.steps) + 1);
  EncoderParams grads;
  auto record = [&](double loss, int step) {
    if (!std::isfinite(loss) || loss > options.divergence_threshold) {
      throw TrainingError("training diverged at step " + std::to_string(step) +
                          " (loss " + std::to_string(loss) + ")");
    }
    res.loss_trace.push_back(loss);
  };
  for (int step = 0; step < options.steps; ++step) {
    record(batch_loss(batch, res.params, config, lm, &grads), step);
    res.params.add_scaled(grads, -options.learning_rate);
  }
  record(batch_loss(batch, res.params, config, lm, nullptr), options.steps);
  return res;
}

std::vector<ToyExample> make_toy_fixture(const EncoderConfig& config, const MockLM& lm,
                                         std::uint64_t teacher_seed) {
  if (config.d_llm != lm.d_llm()) throw ConfigError("encoder d_llm must match the mock LM");
  struct Node {
    const char* word;
    MoralLabel moral;
  };
  const Node nodes[] = {{"reinstated", MoralLabel::kAuthority},
                        {"ban", MoralLabel::kHarm},
                        {"protect", MoralLabel::kCare},
                        {"reinstatement", MoralLabel::kNonMoral},
                        {"criticized", MoralLabel::kFairness}};
  ToyExample ex;
  ex.graph.n_nodes = 5;
  ex.init.resize(config.d_node, 5);
  for (int i = 0; i < 5; ++i) {
    ex.graph.morals.push_back(nodes[i].moral);
    ex.init.col(i) = hash_embedding(nodes[i].word, config.d_node);
  }
  ex.graph.edges = {{0, 1, RelationLabel::kContains}, {0, 2, RelationLabel::kBefore},
                    {0, 4, RelationLabel::kBefore},    {1, 2, RelationLabel::kCauses},
                    {1, 4, RelationLabel::kCauses},    {0, 3, RelationLabel::kCoreference},
                    {2, 3, RelationLabel::kCoreference}, {3, 4, RelationLabel::kCausedBy},
                    {2, 4, RelationLabel::kOverlap}};
  ex.text = "Supreme Court reinstates the travel ban";

  EncoderConfig teacher_config = config;
  teacher_config.seed = teacher_seed;
  const EncoderParams teacher = EncoderParams::glorot(teacher_config);
  const Eigen::VectorXd soft = forward(ex.graph, ex.init, teacher, config).soft_prompt;
  ex.target = lm.readout(soft, lm.embed_text(ex.text));
  return {std::move(ex)};
}

double monotone_fraction(std::span<const double> trace) {
  if (trace.size() < 2) return 1.0;
  std::size_t ok = 0;
  for (std::size_t k = 0; k + 1 < trace.size(); ++k) ok += trace[k + 1] <= trace[k] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(trace.size() - 1);
}

void write_loss_trace_csv(const std::filesystem::path& path, std::span<const double> trace) {
  std::string out = "step,loss\n";
  char buf[64];
  for (std::size_t k = 0; k < trace.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", k, trace[k]);
    out += buf;
  }
  write_text_file(path, out);
}

}  // namespace neutralsum
