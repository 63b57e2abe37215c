#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cslot/error.hpp"
#include "cslot/neural.hpp"

using namespace cslot;

namespace {

ModelShape tiny_shape() { return {{20}, {8}, 8, {{"a", "b", "c", "d", "e"}, {"x", "y", "z"}}}; }

TrainingExample random_example(std::size_t len, std::size_t vocab, const std::vector<std::size_t>& classes, Rng& rng) {
  TrainingExample ex;
  ex.input.ids.resize(1);
  ex.gold.resize(classes.size());
  for (std::size_t t = 0; t < len; ++t) {
    ex.input.ids[0].push_back(rng.index(vocab));
    for (std::size_t h = 0; h < classes.size(); ++h) ex.gold[h].push_back(rng.index(classes[h]));
  }
  return ex;
}

// Plain loop LSTM, independent of the Eigen implementation.
std::vector<std::vector<double>> reference_direction(const LstmParams& p, const std::vector<std::vector<double>>& xs,
                                                     bool reverse) {
  const std::size_t H = p.hidden();
  const std::size_t n = xs.size();
  const std::size_t I = xs.empty() ? 0 : xs[0].size();
  std::vector<std::vector<double>> out(n, std::vector<double>(H));
  std::vector<double> h(H, 0.0), c(H, 0.0);
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    std::vector<double> z(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double s = p.bias(static_cast<Eigen::Index>(r));
      for (std::size_t k = 0; k < I; ++k) s += p.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) * xs[t][k];
      for (std::size_t k = 0; k < H; ++k)
        s += p.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(I + k)) * h[k];
      z[r] = s;
    }
    for (std::size_t k = 0; k < H; ++k) {
      const double i = sig(z[k]), f = sig(z[H + k]), o = sig(z[2 * H + k]), g = std::tanh(z[3 * H + k]);
      c[k] = f * c[k] + i * g;
      h[k] = o * std::tanh(c[k]);
    }
    out[t] = h;
  }
  return out;
}

}  // namespace

TEST(Init, UniformWithinRangeAndSeeded) {
  const auto a = init_params(tiny_shape(), 42);
  const auto b = init_params(tiny_shape(), 42);
  EXPECT_TRUE(bit_identical(a, b));
  EXPECT_FALSE(bit_identical(a, init_params(tiny_shape(), 43)));
  for (const auto& block : a.blocks())
    for (double v : block.values) {
      EXPECT_GE(v, -0.2);
      EXPECT_LE(v, 0.2);
    }
}

TEST(Init, SampleMeanNearZero) {
  const ModelShape big{{1000}, {100}, 2, {{"a"}}};
  const auto p = init_params(big, 5);
  const auto& t = p.embeddings[0].table;
  ASSERT_EQ(t.size(), 100000);
  const double mean = t.sum() / static_cast<double>(t.size());
  EXPECT_GT(mean, -0.005);
  EXPECT_LT(mean, 0.005);
}

TEST(Blstm, EmptySequence) {
  const auto p = init_params(tiny_shape(), 1);
  InputSequence in;
  in.ids.resize(1);
  EXPECT_EQ(blstm_forward(p, in).cols(), 0);
}

TEST(Blstm, ZeroParametersGiveConstantFeatures) {
  auto p = init_params(tiny_shape(), 1);
  p.set_zero();
  InputSequence in{{{1, 4, 7, 2}}};
  const Matrix f = blstm_forward(p, in);
  for (Eigen::Index t = 1; t < f.cols(); ++t) EXPECT_EQ(f.col(t), f.col(0));
  // c = 0.5 * 0 = 0 at every step, so h = 0.5 * tanh(0) = 0.
  EXPECT_EQ(f.col(0).norm(), 0.0);
}

TEST(Blstm, MatchesReferenceImplementation) {
  const auto p = init_params(tiny_shape(), 3, 0.5);
  InputSequence in{{{3, 9, 0, 19, 4, 4}}};
  const Matrix f = blstm_forward(p, in);
  std::vector<std::vector<double>> xs;
  for (auto id : in.ids[0]) {
    const auto col = p.embeddings[0].table.col(static_cast<Eigen::Index>(id));
    xs.emplace_back(col.data(), col.data() + col.size());
  }
  const auto fwd = reference_direction(p.forward, xs, false);
  const auto bwd = reference_direction(p.backward, xs, true);
  const std::size_t H = p.hidden();
  for (std::size_t t = 0; t < xs.size(); ++t)
    for (std::size_t k = 0; k < H; ++k) {
      EXPECT_NEAR(f(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)), fwd[t][k], 1e-12);
      EXPECT_NEAR(f(static_cast<Eigen::Index>(H + k), static_cast<Eigen::Index>(t)), bwd[t][k], 1e-12);
    }
}

TEST(Blstm, ReversalSwapsDirectionHalves) {
  auto p = init_params(tiny_shape(), 4, 0.5);
  p.backward = p.forward;
  InputSequence in{{{1, 2, 3, 5, 8}}};
  InputSequence rev{{{8, 5, 3, 2, 1}}};
  const Matrix a = blstm_forward(p, in);
  const Matrix b = blstm_forward(p, rev);
  const Eigen::Index H = static_cast<Eigen::Index>(p.hidden());
  const Eigen::Index n = a.cols();
  for (Eigen::Index t = 0; t < n; ++t) {
    EXPECT_EQ(a.col(t).head(H), b.col(n - 1 - t).tail(H));
    EXPECT_EQ(a.col(t).tail(H), b.col(n - 1 - t).head(H));
  }
}

TEST(Softmax, ClosedFormAndInvariances) {
  Vector logits(3);
  logits << 1, 2, 3;
  const Vector p = softmax(logits);
  EXPECT_NEAR(p(0), 0.09003057, 1e-8);
  EXPECT_NEAR(p(1), 0.24472847, 1e-8);
  EXPECT_NEAR(p(2), 0.66524096, 1e-8);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  const Vector shifted = softmax((logits.array() + 1000.0).matrix());
  EXPECT_NEAR((shifted - p).cwiseAbs().maxCoeff(), 0.0, 1e-15);

  Rng rng(1);
  const auto head = init_head({"a", "b", "c", "d"}, 6, rng);
  SoftmaxHead zero = head;
  zero.weights.setZero();
  zero.bias.setZero();
  const Vector u = head_forward(zero, Vector::Random(6));
  for (Eigen::Index i = 0; i < u.size(); ++i) EXPECT_DOUBLE_EQ(u(i), 0.25);
}

TEST(Softmax, ValidDistributionForExtremeLogits) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    Vector logits(7);
    for (Eigen::Index i = 0; i < 7; ++i) logits(i) = rng.uniform(-700.0, 700.0);
    const Vector p = softmax(logits);
    EXPECT_TRUE((p.array() >= 0.0).all());
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  }
}

TEST(Argmax, LowestIndexWinsTies) {
  Vector v(4);
  v << 0.25, 0.25, 0.25, 0.25;
  EXPECT_EQ(argmax(v), 0u);
  v << 0.1, 0.4, 0.4, 0.1;
  EXPECT_EQ(argmax(v), 1u);
}

TEST(Loss, ClosedForms) {
  // One-class head: probability 1, loss 0.
  ModelShape one{{5}, {3}, 2, {{"only"}}};
  const auto p1 = init_params(one, 1);
  TrainingExample ex{{{{1, 2}}}, {{0, 0}}};
  EXPECT_DOUBLE_EQ(total_loss(p1, std::span(&ex, 1)), 0.0);

  // Zero head: uniform over C classes, loss ln C per position.
  ModelShape five{{5}, {3}, 2, {{"a", "b", "c", "d", "e"}}};
  auto p5 = init_params(five, 1);
  p5.heads[0].weights.setZero();
  p5.heads[0].bias.setZero();
  TrainingExample single{{{{3}}}, {{2}}};
  EXPECT_NEAR(total_loss(p5, std::span(&single, 1)), std::log(5.0), 1e-12);
}

TEST(Gradients, MatchFiniteDifferences) {
  const auto p = init_params(tiny_shape(), 11);
  Rng rng(12);
  std::vector<TrainingExample> batch{random_example(5, 20, {5, 3}, rng)};
  const auto report = gradient_check(p, batch, 1e-4, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
  EXPECT_LT(report.max_relative_error, 1e-4);
}

TEST(Gradients, MatchFiniteDifferencesWithDropoutAndTwoStreams) {
  const ModelShape shape{{9, 4}, {3, 2}, 4, {{"a", "b", "c"}, {"x", "y"}}};
  const auto p = init_params(shape, 21, 0.4);
  Rng rng(22);
  std::vector<TrainingExample> batch;
  for (std::size_t len : {1, 4}) {
    TrainingExample ex;
    ex.input.ids = {{}, {}};
    ex.gold = {{}, {}};
    for (std::size_t t = 0; t < len; ++t) {
      ex.input.ids[0].push_back(rng.index(9));
      ex.input.ids[1].push_back(rng.index(4));
      ex.gold[0].push_back(rng.index(3));
      ex.gold[1].push_back(rng.index(2));
    }
    batch.push_back(ex);
  }
  std::vector<DropoutMask> masks;
  for (const auto& ex : batch) masks.push_back(sample_dropout(p, ex.input.length(), 0.3, rng));
  const auto report = gradient_check(p, batch, 1e-4, 1e-4, masks);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(Gradients, CorruptedGradientFailsAndEmptyBlockPasses) {
  const auto p = init_params(tiny_shape(), 31);
  Rng rng(32);
  std::vector<TrainingExample> batch{random_example(3, 20, {5, 3}, rng)};
  auto lg = loss_and_gradients(p, batch);
  lg.gradients.forward.weights(0, 0) += 0.5;
  EXPECT_FALSE(gradient_check(p, lg.gradients, batch, 1e-4, 1e-4).passed);

  const ModelShape no_embedding{{1}, {0}, 2, {{"a", "b"}}};
  const auto q = init_params(no_embedding, 1);
  std::vector<TrainingExample> b2{{{{{0, 0}}}, {{1, 0}}}};
  const auto r = gradient_check(q, b2, 1e-4, 1e-4);
  EXPECT_EQ(r.blocks.front().size, 0u);
  EXPECT_EQ(r.blocks.front().max_relative_error, 0.0);
  EXPECT_TRUE(r.passed);
}

TEST(Gradients, Deterministic) {
  const auto p = init_params(tiny_shape(), 41);
  Rng rng(42);
  std::vector<TrainingExample> batch{random_example(6, 20, {5, 3}, rng)};
  Rng m1(7), m2(7);
  std::vector<DropoutMask> a{sample_dropout(p, 6, 0.5, m1)};
  std::vector<DropoutMask> b{sample_dropout(p, 6, 0.5, m2)};
  const auto x = loss_and_gradients(p, batch, a);
  const auto y = loss_and_gradients(p, batch, b);
  EXPECT_EQ(x.loss, y.loss);
  EXPECT_TRUE(bit_identical(x.gradients, y.gradients));
}

TEST(Dropout, InvertedScaling) {
  const auto p = init_params(tiny_shape(), 1);
  Rng rng(3);
  const auto m = sample_dropout(p, 400, 0.5, rng);
  EXPECT_TRUE(((m.input.array() == 0.0) || (m.input.array() == 2.0)).all());
  EXPECT_NEAR(m.output.mean(), 1.0, 0.05);
  const auto none = sample_dropout(p, 3, 0.0, rng);
  EXPECT_TRUE((none.input.array() == 1.0).all());
}

TEST(Sgd, UpdateRule) {
  auto p = init_params(tiny_shape(), 1);
  const auto before = p;
  auto g = p.zeros_like();
  for (auto& b : g.blocks())
    for (double& v : b.values) v = 1.0;
  sgd_step(p, g, 0.0);
  EXPECT_TRUE(bit_identical(p, before));

  // f(p) = p^2 / 2 has gradient p: one step from 1 with lr 0.1 gives 0.9.
  p.heads[0].bias(0) = 1.0;
  g.set_zero();
  g.heads[0].bias(0) = p.heads[0].bias(0);
  sgd_step(p, g, 0.1);
  EXPECT_DOUBLE_EQ(p.heads[0].bias(0), 0.9);
}

TEST(Sgd, FrozenEmbeddingsAndNonFiniteGradients) {
  auto p = init_params(tiny_shape(), 1);
  p.embeddings[0].frozen = 5;
  auto g = p.zeros_like();
  g.embeddings[0].table.setConstant(1.0);
  const auto before = p;
  sgd_step(p, g, 0.1);
  EXPECT_EQ(p.embeddings[0].table.leftCols(5), before.embeddings[0].table.leftCols(5));
  EXPECT_NE(p.embeddings[0].table.col(5), before.embeddings[0].table.col(5));

  const auto snapshot = p;
  g.forward.bias(3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(sgd_step(p, g, 0.1), NonFiniteGradient);
  EXPECT_TRUE(bit_identical(p, snapshot));
}

TEST(Sgd, LossDecreasesOnFixedExample) {
  auto p = init_params(tiny_shape(), 51);
  Rng rng(52);
  std::vector<TrainingExample> batch{random_example(5, 20, {5, 3}, rng)};
  double last = total_loss(p, batch);
  for (int step = 0; step < 50; ++step) {
    const auto lg = loss_and_gradients(p, batch);
    sgd_step(p, lg.gradients, 0.01);
    const double now = total_loss(p, batch);
    EXPECT_LT(now, last) << "step " << step;
    last = now;
  }
}

TEST(Heads, ExtensionKeepsExistingRows) {
  Rng rng(1);
  auto head = init_head({"O", "B-a"}, 6, rng);
  const auto before = head;
  extend_head(head, {"I-a", "B-b"}, rng);
  ASSERT_EQ(head.classes(), 4u);
  EXPECT_EQ(head.weights.topRows(2), before.weights);
  EXPECT_EQ(head.bias.head(2), before.bias);
  EXPECT_EQ(head.find("B-b"), 3u);
  EXPECT_EQ(head.find("missing"), 4u);
  EXPECT_LE(head.weights.bottomRows(2).cwiseAbs().maxCoeff(), 0.2);
}

TEST(Checkpoint, LosslessRoundTrip) {
  auto p = init_params({{7, 3}, {4, 2}, 3, {{"O", "B", "I"}, {"null", "a"}}}, 9);
  p.embeddings[0].frozen = 2;
  p.heads[0].bias(1) = 1.0 / 3.0;
  p.forward.weights(0, 0) = -1e-300;
  std::stringstream buf;
  write_checkpoint(p, buf);
  const auto q = read_checkpoint(buf);
  EXPECT_TRUE(bit_identical(p, q));
  EXPECT_EQ(q.embeddings[0].frozen, 2u);
  EXPECT_EQ(q.heads[1].labels, p.heads[1].labels);
}

TEST(Checkpoint, RejectsDamage) {
  const auto p = init_params(tiny_shape(), 1);
  std::stringstream buf;
  write_checkpoint(p, buf);
  std::string text = buf.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(read_checkpoint(truncated), CheckpointError);
  std::istringstream version("cslot-checkpoint 9\n");
  EXPECT_THROW(read_checkpoint(version), CheckpointError);
}
