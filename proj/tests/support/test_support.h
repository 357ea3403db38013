#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neutralsum/encoder.h"
#include "neutralsum/graph.h"
#include "neutralsum/metrics.h"

namespace neutralsum::testing {

// Seeded generator for property tests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(gen_); }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform_int(0, static_cast<int>(v.size()) - 1))];
  }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

struct GraphGenOptions {
  int min_docs = 1;
  int max_docs = 3;
  int max_words = 12;
  double event_rate = 0.4;
  double edge_rate = 0.3;
  double crossdoc_rate = 0.2;
  // Draw words containing '|', '\\' and non-ASCII bytes.
  bool awkward_words = false;
};

// Random graph that passes validate(): in-doc edges follow textual order,
// cross-doc edges are coreference, and the partition is the closure.
MultiDocGraph random_graph(Rng& rng, const GraphGenOptions& options = {});

struct EncoderCase {
  EncoderConfig config;
  EncoderGraph graph;
  NodeInit init;
  EncoderParams params;
};

// n nodes with random morals and a mix of directed and coreference edges.
EncoderCase random_encoder_case(Rng& rng, int min_nodes, int max_nodes, int min_dim, int max_dim);

// Counts every statistic by direct enumeration over events and pairs.
GraphStats brute_force_stats(const MultiDocGraph& g);

// Independent reference implementations.
double oracle_rouge_n(const Tokens& hyp, const Tokens& ref, int n);
int oracle_lcs(const Tokens& a, const Tokens& b);
double oracle_rouge_l(const Tokens& hyp, const Tokens& ref);
double oracle_rouge_lsum(const std::vector<Tokens>& hyp, const std::vector<Tokens>& ref);
double oracle_bleu2(const Tokens& hyp, const Tokens& ref, bool smoothing = false,
                    double epsilon = 0.1);
Tokens random_tokens(Rng& rng, int max_len, int vocab = 6);

struct BlockError {
  std::string name;
  double relative_error = 0;
  double analytic_norm = 0;
  double absolute_error = 0;
};

// Below this block norm a gradient is indistinguishable from central
// difference roundoff (about 1e-16 * |loss| / h per entry).
inline constexpr double kGradientNormFloor = 1e-6;

// Central differences for every parameter block against gradient():
// ||analytic - numeric|| / max(||analytic|| + ||numeric||, kGradientNormFloor).
std::vector<BlockError> gradient_check(const EncoderCase& c, const SoftPromptLoss& loss,
                                       double h = 1e-5);

// Path of the shipped templates and the end-to-end fixture.
std::filesystem::path source_dir();
std::filesystem::path fixture_dir();
std::filesystem::path templates_dir();

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

}  // namespace neutralsum::testing
