#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "neutralsum/encoder.h"

namespace neutralsum {

// Frozen stand-in for a language model: the soft-prompt position's residual
// plus one linear-attention readout over x = [soft_prompt; text embeddings],
//   o = W_o * (x_0 + (1/N) sum_k (q . x_k) x_k)
class MockLM {
 public:
  MockLM(int d_llm, int d_out, std::uint64_t seed);

  int d_llm() const { return static_cast<int>(q_.size()); }
  int d_out() const { return static_cast<int>(W_o_.rows()); }

  // One embedding per tokenized word, scaled to unit-ish norm.
  std::vector<Eigen::VectorXd> embed_text(std::string_view text) const;

  Eigen::VectorXd readout(const Eigen::VectorXd& soft_prompt,
                          std::span<const Eigen::VectorXd> text) const;
  // d(g . readout) / d(soft_prompt)
  Eigen::VectorXd readout_backward(const Eigen::VectorXd& soft_prompt,
                                   std::span<const Eigen::VectorXd> text,
                                   const Eigen::VectorXd& g) const;

 private:
  std::uint64_t seed_;
  Eigen::VectorXd q_;
  Eigen::MatrixXd W_o_;
};

// Squared distance between the mock LM readout and a target readout.
class ReadoutLoss : public SoftPromptLoss {
 public:
  ReadoutLoss(const MockLM& lm, std::vector<Eigen::VectorXd> text, Eigen::VectorXd target);
  double evaluate(const Eigen::VectorXd& soft_prompt, Eigen::VectorXd* grad) const override;

 private:
  const MockLM& lm_;
  std::vector<Eigen::VectorXd> text_;
  Eigen::VectorXd target_;
};

struct ToyExample {
  EncoderGraph graph;
  NodeInit init;
  std::string text;
  Eigen::VectorXd target;  // desired readout, width d_out
};

struct TrainOptions {
  int steps = 200;
  double learning_rate = 1e-2;
  double divergence_threshold = 1e6;
};

struct TrainResult {
  EncoderParams params;
  // steps + 1 entries: loss before each update, then the final loss.
  std::vector<double> loss_trace;
};

// Mean ReadoutLoss over the batch.
double batch_loss(std::span<const ToyExample> batch, const EncoderParams& params,
                  const EncoderConfig& config, const MockLM& lm, EncoderParams* grads);

// Full-batch gradient descent from EncoderParams::glorot(config). Only encoder
// parameters move. Throws TrainingError once the loss exceeds the divergence
// threshold or turns non-finite.
TrainResult train_toy(std::span<const ToyExample> batch, const EncoderConfig& config,
                      const MockLM& lm, const TrainOptions& options = {});

// Five events across two documents with mixed relation types. Targets are the
// readouts of a teacher encoder initialised from teacher_seed.
std::vector<ToyExample> make_toy_fixture(const EncoderConfig& config, const MockLM& lm,
                                         std::uint64_t teacher_seed = 7);

// Fraction of steps k with trace[k+1] <= trace[k].
double monotone_fraction(std::span<const double> trace);

// "step,loss" CSV, one row per trace entry, full precision.
void write_loss_trace_csv(const std::filesystem::path& path, std::span<const double> trace);

}  // namespace neutralsum
