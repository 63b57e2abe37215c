#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cslot/rng.hpp"

namespace cslot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Lookup table stored one entry per column. The first `frozen` entries are
// never touched by sgd_step.
struct EmbeddingTable {
  Matrix table;  // dim x entries
  std::size_t frozen = 0;

  std::size_t dim() const { return static_cast<std::size_t>(table.rows()); }
  std::size_t entries() const { return static_cast<std::size_t>(table.cols()); }
};

// Standard LSTM cell, no peepholes. Gate rows are ordered
// [input, forget, output, candidate]; columns are [x ; h_prev].
struct LstmParams {
  Matrix weights;  // 4H x (I + H)
  Vector bias;     // 4H

  std::size_t hidden() const { return static_cast<std::size_t>(bias.size()) / 4; }
};

struct SoftmaxHead {
  Matrix weights;  // classes x features
  Vector bias;     // classes
  std::vector<std::string> labels;

  std::size_t classes() const { return static_cast<std::size_t>(bias.size()); }
  // Index of `label`, or classes() when absent.
  std::size_t find(const std::string& label) const;
};

struct ParamBlock {
  std::string name;
  std::span<double> values;
  std::size_t frozen = 0;  // leading values excluded from updates
};

struct ConstParamBlock {
  std::string name;
  std::span<const double> values;
};

// Embedding streams -> bidirectional LSTM -> one or more softmax heads. The
// BLSTM input at each position is the concatenation of one embedding per
// stream.
struct ModelParams {
  std::vector<EmbeddingTable> embeddings;
  LstmParams forward;
  LstmParams backward;
  std::vector<SoftmaxHead> heads;

  std::size_t input_dim() const;
  std::size_t hidden() const { return forward.hidden(); }
  std::size_t feature_dim() const { return 2 * hidden(); }
  std::size_t parameter_count() const;

  // Same shapes and labels, all values zero.
  ModelParams zeros_like() const;
  void set_zero();

  std::vector<ParamBlock> blocks();
  std::vector<ConstParamBlock> blocks() const;

  bool all_finite() const;
};

bool bit_identical(const ModelParams& a, const ModelParams& b);

struct ModelShape {
  std::vector<std::size_t> vocab_sizes;     // one per input stream
  std::vector<std::size_t> embedding_dims;  // one per input stream
  std::size_t hidden = 100;
  std::vector<std::vector<std::string>> head_labels;
};

// Every parameter i.i.d. uniform(-init_range, init_range).
ModelParams init_params(const ModelShape& shape, std::uint64_t seed, double init_range = 0.2);

// Fresh head with uniform(-init_range, init_range) weights.
SoftmaxHead init_head(std::vector<std::string> labels, std::size_t features, Rng& rng, double init_range = 0.2);

// Appends classes to a head; existing rows are kept bit-exactly and new rows
// drawn uniform(-init_range, init_range).
void extend_head(SoftmaxHead& head, const std::vector<std::string>& new_labels, Rng& rng, double init_range = 0.2);

// ids[stream][position]
struct InputSequence {
  std::vector<std::vector<std::size_t>> ids;

  std::size_t length() const { return ids.empty() ? 0 : ids.front().size(); }
};

// Inverted dropout on the non-recurrent connections. Entries are 0 or
// 1/keep; one column per position.
struct DropoutMask {
  Matrix input;   // input_dim x n
  Matrix output;  // feature_dim x n
};

DropoutMask sample_dropout(const ModelParams& params, std::size_t length, double p, Rng& rng);

// [h_forward ; h_backward] per position, feature_dim x n.
Matrix blstm_forward(const ModelParams& params, const InputSequence& input, const DropoutMask* mask = nullptr);

// softmax(W x + b)
Vector head_forward(const SoftmaxHead& head, const Vector& features);
Vector softmax(const Vector& logits);

// Per head, a classes x n matrix of probabilities.
std::vector<Matrix> predict(const ModelParams& params, const InputSequence& input);

// Index of the first maximum.
std::size_t argmax(const Eigen::Ref<const Vector>& v);

struct TrainingExample {
  InputSequence input;
  std::vector<std::vector<std::size_t>> gold;  // gold[head][position]
};

struct LossAndGradients {
  double loss = 0.0;
  ModelParams gradients;
};

// Summed negative log-likelihood over positions and heads, with gradients from
// full backpropagation through time. `masks`, when given, holds one mask per
// example.
LossAndGradients loss_and_gradients(const ModelParams& params, std::span<const TrainingExample> batch,
                                    std::span<const DropoutMask> masks = {});

// Adds the gradient of one example into `grad` and returns its loss.
double accumulate_gradients(const ModelParams& params, const TrainingExample& example, const DropoutMask* mask,
                            ModelParams& grad);

double total_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                  std::span<const DropoutMask> masks = {});

// p <- p - lr * g, skipping frozen embedding entries. Throws
// NonFiniteGradient (leaving params untouched) if any gradient is not finite.
void sgd_step(ModelParams& params, const ModelParams& grad, double learning_rate);

struct BlockCheck {
  std::string name;
  std::size_t size = 0;
  double max_relative_error = 0.0;
};

struct GradientCheckReport {
  std::vector<BlockCheck> blocks;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps entries that
// are zero up to rounding from dominating.
inline constexpr double kRelativeErrorFloor = 1e-6;

// Compares `analytic` against central differences of total_loss.
GradientCheckReport gradient_check(const ModelParams& params, const ModelParams& analytic,
                                   std::span<const TrainingExample> batch, double epsilon, double tolerance,
                                   std::span<const DropoutMask> masks = {});
GradientCheckReport gradient_check(const ModelParams& params, std::span<const TrainingExample> batch,
                                   double epsilon, double tolerance, std::span<const DropoutMask> masks = {});

// ---- checkpoints: versioned text, 17 significant digits ----

void write_checkpoint(const ModelParams& params, std::ostream& out);
ModelParams read_checkpoint(std::istream& in);
void write_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams read_checkpoint(const std::filesystem::path& path);

}  // namespace cslot
