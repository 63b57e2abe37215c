#include "cslot/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cslot/error.hpp"

namespace cslot {

std::size_t SoftmaxHead::find(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  return static_cast<std::size_t>(it - labels.begin());
}

std::size_t ModelParams::input_dim() const {
  std::size_t d = 0;
  for (const auto& e : embeddings) d += e.dim();
  return d;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.values.size();
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.set_zero();
  return z;
}

void ModelParams::set_zero() {
  for (auto& e : embeddings) e.table.setZero();
  forward.weights.setZero();
  forward.bias.setZero();
  backward.weights.setZero();
  backward.bias.setZero();
  for (auto& h : heads) {
    h.weights.setZero();
    h.bias.setZero();
  }
}

namespace {

template <typename Derived>
std::span<double> view(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename Derived>
std::span<const double> view(const Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace

std::vector<ParamBlock> ModelParams::blocks() {
  std::vector<ParamBlock> out;
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    out.push_back({"embedding[" + std::to_string(i) + "]", view(embeddings[i].table),
                   embeddings[i].frozen * embeddings[i].dim()});
  out.push_back({"forward.weights", view(forward.weights)});
  out.push_back({"forward.bias", view(forward.bias)});
  out.push_back({"backward.weights", view(backward.weights)});
  out.push_back({"backward.bias", view(backward.bias)});
  for (std::size_t i = 0; i < heads.size(); ++i) {
    out.push_back({"head[" + std::to_string(i) + "].weights", view(heads[i].weights)});
    out.push_back({"head[" + std::to_string(i) + "].bias", view(heads[i].bias)});
  }
  return out;
}

std::vector<ConstParamBlock> ModelParams::blocks() const {
  std::vector<ConstParamBlock> out;
  for (auto& b : const_cast<ModelParams*>(this)->blocks()) out.push_back({b.name, b.values});
  return out;
}

bool ModelParams::all_finite() const {
  for (const auto& b : blocks())
    for (double v : b.values)
      if (!std::isfinite(v)) return false;
  return true;
}

bool bit_identical(const ModelParams& a, const ModelParams& b) {
  const auto ba = a.blocks();
  const auto bb = b.blocks();
  if (ba.size() != bb.size()) return false;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (ba[i].name != bb[i].name || ba[i].values.size() != bb[i].values.size()) return false;
    if (!std::equal(ba[i].values.begin(), ba[i].values.end(), bb[i].values.begin())) return false;
  }
  if (a.heads.size() != b.heads.size()) return false;
  for (std::size_t i = 0; i < a.heads.size(); ++i)
    if (a.heads[i].labels != b.heads[i].labels || a.heads[i].weights.rows() != b.heads[i].weights.rows())
      return false;
  for (std::size_t i = 0; i < a.embeddings.size(); ++i)
    if (a.embeddings[i].frozen != b.embeddings[i].frozen || a.embeddings[i].dim() != b.embeddings[i].dim())
      return false;
  return true;
}

namespace {

void fill_uniform(std::span<double> values, Rng& rng, double range) {
  for (auto& v : values) v = rng.uniform(-range, range);
}

}  // namespace

SoftmaxHead init_head(std::vector<std::string> labels, std::size_t features, Rng& rng, double init_range) {
  SoftmaxHead h;
  const auto c = static_cast<Eigen::Index>(labels.size());
  h.weights.resize(c, static_cast<Eigen::Index>(features));
  h.bias.resize(c);
  fill_uniform(view(h.weights), rng, init_range);
  fill_uniform(view(h.bias), rng, init_range);
  h.labels = std::move(labels);
  return h;
}

void extend_head(SoftmaxHead& head, const std::vector<std::string>& new_labels, Rng& rng, double init_range) {
  if (new_labels.empty()) return;
  const auto old_rows = head.weights.rows();
  const auto features = head.weights.cols();
  const auto add = static_cast<Eigen::Index>(new_labels.size());
  head.weights.conservativeResize(old_rows + add, features);
  head.bias.conservativeResize(old_rows + add);
  for (Eigen::Index r = old_rows; r < old_rows + add; ++r) {
    for (Eigen::Index c = 0; c < features; ++c) head.weights(r, c) = rng.uniform(-init_range, init_range);
    head.bias(r) = rng.uniform(-init_range, init_range);
  }
  head.labels.insert(head.labels.end(), new_labels.begin(), new_labels.end());
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed, double init_range) {
  if (shape.vocab_sizes.size() != shape.embedding_dims.size())
    throw std::invalid_argument("init_params: vocab_sizes and embedding_dims differ in length");
  Rng rng(seed);
  ModelParams p;
  std::size_t input = 0;
  for (std::size_t s = 0; s < shape.vocab_sizes.size(); ++s) {
    EmbeddingTable e;
    e.table.resize(static_cast<Eigen::Index>(shape.embedding_dims[s]),
                   static_cast<Eigen::Index>(shape.vocab_sizes[s]));
    fill_uniform(view(e.table), rng, init_range);
    input += shape.embedding_dims[s];
    p.embeddings.push_back(std::move(e));
  }
  const auto h = static_cast<Eigen::Index>(shape.hidden);
  for (LstmParams* cell : {&p.forward, &p.backward}) {
    cell->weights.resize(4 * h, static_cast<Eigen::Index>(input) + h);
    cell->bias.resize(4 * h);
    fill_uniform(view(cell->weights), rng, init_range);
    fill_uniform(view(cell->bias), rng, init_range);
  }
  for (const auto& labels : shape.head_labels) p.heads.push_back(init_head(labels, 2 * shape.hidden, rng, init_range));
  return p;
}

DropoutMask sample_dropout(const ModelParams& params, std::size_t length, double p, Rng& rng) {
  const double keep = 1.0 - p;
  const auto n = static_cast<Eigen::Index>(length);
  DropoutMask m;
  m.input.resize(static_cast<Eigen::Index>(params.input_dim()), n);
  m.output.resize(static_cast<Eigen::Index>(params.feature_dim()), n);
  for (Matrix* mat : {&m.input, &m.output})
    for (Eigen::Index i = 0; i < mat->size(); ++i) mat->data()[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return m;
}

namespace {

struct DirectionTrace {
  Matrix in, forget, out, cand, cell, tanh_cell, hidden;  // H x n
};

struct Trace {
  Matrix x;         // input_dim x n, after dropout
  DirectionTrace fwd, bwd;
  Matrix features;  // feature_dim x n, after dropout
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Matrix gather_inputs(const ModelParams& params, const InputSequence& input) {
  const auto n = static_cast<Eigen::Index>(input.length());
  Matrix x(static_cast<Eigen::Index>(params.input_dim()), n);
  Eigen::Index offset = 0;
  for (std::size_t s = 0; s < params.embeddings.size(); ++s) {
    const auto& table = params.embeddings[s].table;
    const auto d = table.rows();
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto id = input.ids[s][static_cast<std::size_t>(t)];
      x.block(offset, t, d, 1) = table.col(static_cast<Eigen::Index>(id));
    }
    offset += d;
  }
  return x;
}

void run_direction(const LstmParams& p, const Matrix& x, bool reverse, DirectionTrace& tr) {
  const auto h = static_cast<Eigen::Index>(p.hidden());
  const auto in_dim = x.rows();
  const auto n = x.cols();
  Matrix pre = p.weights.leftCols(in_dim) * x;
  pre.colwise() += p.bias;
  for (Matrix* m : {&tr.in, &tr.forget, &tr.out, &tr.cand, &tr.cell, &tr.tanh_cell, &tr.hidden}) m->resize(h, n);

  Vector hid = Vector::Zero(h);
  Vector cell = Vector::Zero(h);
  Vector z(4 * h);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::Index t = reverse ? n - 1 - s : s;
    z.noalias() = pre.col(t) + p.weights.rightCols(h) * hid;
    for (Eigen::Index k = 0; k < h; ++k) {
      const double gi = sigmoid(z(k));
      const double gf = sigmoid(z(h + k));
      const double go = sigmoid(z(2 * h + k));
      const double gg = std::tanh(z(3 * h + k));
      cell(k) = gf * cell(k) + gi * gg;
      const double tc = std::tanh(cell(k));
      hid(k) = go * tc;
      tr.in(k, t) = gi;
      tr.forget(k, t) = gf;
      tr.out(k, t) = go;
      tr.cand(k, t) = gg;
      tr.tanh_cell(k, t) = tc;
    }
    tr.cell.col(t) = cell;
    tr.hidden.col(t) = hid;
  }
}

Trace forward_trace(const ModelParams& params, const InputSequence& input, const DropoutMask* mask) {
  Trace tr;
  tr.x = gather_inputs(params, input);
  if (mask) tr.x.array() *= mask->input.array();
  run_direction(params.forward, tr.x, false, tr.fwd);
  run_direction(params.backward, tr.x, true, tr.bwd);
  const auto h = static_cast<Eigen::Index>(params.hidden());
  tr.features.resize(2 * h, tr.x.cols());
  tr.features.topRows(h) = tr.fwd.hidden;
  tr.features.bottomRows(h) = tr.bwd.hidden;
  if (mask) tr.features.array() *= mask->output.array();
  return tr;
}

// Accumulates parameter gradients of one direction and adds dL/dx into dx.
void backprop_direction(const LstmParams& p, const Matrix& x, const DirectionTrace& tr, bool reverse,
                        const Matrix& dh_out, LstmParams& grad, Matrix& dx) {
  const auto h = static_cast<Eigen::Index>(p.hidden());
  const auto in_dim = x.rows();
  const auto n = x.cols();
  Matrix dz(4 * h, n);
  Matrix h_prev = Matrix::Zero(h, n);
  Vector dh_next = Vector::Zero(h);
  Vector dc_next = Vector::Zero(h);
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    const Eigen::Index t = reverse ? n - 1 - s : s;
    const Eigen::Index tp = reverse ? t + 1 : t - 1;
    const bool has_prev = s > 0;
    if (has_prev) h_prev.col(t) = tr.hidden.col(tp);
    for (Eigen::Index k = 0; k < h; ++k) {
      const double gi = tr.in(k, t), gf = tr.forget(k, t), go = tr.out(k, t), gg = tr.cand(k, t);
      const double tc = tr.tanh_cell(k, t);
      const double c_prev = has_prev ? tr.cell(k, tp) : 0.0;
      const double dh = dh_out(k, t) + dh_next(k);
      const double dc = dc_next(k) + dh * go * (1.0 - tc * tc);
      dz(k, t) = dc * gg * gi * (1.0 - gi);
      dz(h + k, t) = dc * c_prev * gf * (1.0 - gf);
      dz(2 * h + k, t) = dh * tc * go * (1.0 - go);
      dz(3 * h + k, t) = dc * gi * (1.0 - gg * gg);
      dc_next(k) = dc * gf;
    }
    dh_next.noalias() = p.weights.rightCols(h).transpose() * dz.col(t);
  }
  grad.weights.leftCols(in_dim).noalias() += dz * x.transpose();
  grad.weights.rightCols(h).noalias() += dz * h_prev.transpose();
  grad.bias += dz.rowwise().sum();
  dx.noalias() += p.weights.leftCols(in_dim).transpose() * dz;
}

}  // namespace

Matrix blstm_forward(const ModelParams& params, const InputSequence& input, const DropoutMask* mask) {
  if (input.length() == 0) return Matrix(static_cast<Eigen::Index>(params.feature_dim()), 0);
  return forward_trace(params, input, mask).features;
}

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) return logits;
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Vector head_forward(const SoftmaxHead& head, const Vector& features) {
  return softmax(head.weights * features + head.bias);
}

std::vector<Matrix> predict(const ModelParams& params, const InputSequence& input) {
  std::vector<Matrix> out;
  const Matrix features = blstm_forward(params, input);
  for (const auto& head : params.heads) {
    Matrix logits = head.weights * features;
    logits.colwise() += head.bias;
    Matrix probs(logits.rows(), logits.cols());
    for (Eigen::Index t = 0; t < logits.cols(); ++t) probs.col(t) = softmax(logits.col(t));
    out.push_back(std::move(probs));
  }
  return out;
}

std::size_t argmax(const Eigen::Ref<const Vector>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<std::size_t>(best);
}

double accumulate_gradients(const ModelParams& params, const TrainingExample& example, const DropoutMask* mask,
                            ModelParams& grad) {
  const std::size_t n = example.input.length();
  if (n == 0) return 0.0;
  if (example.gold.size() != params.heads.size())
    throw std::invalid_argument("gold label sequences do not match head count");
  const Trace tr = forward_trace(params, example.input, mask);
  const auto cols = static_cast<Eigen::Index>(n);

  double loss = 0.0;
  Matrix dfeat = Matrix::Zero(tr.features.rows(), cols);
  for (std::size_t hi = 0; hi < params.heads.size(); ++hi) {
    const auto& head = params.heads[hi];
    auto& ghead = grad.heads[hi];
    Matrix logits = head.weights * tr.features;
    logits.colwise() += head.bias;
    Matrix dlogits(logits.rows(), cols);
    for (Eigen::Index t = 0; t < cols; ++t) {
      const auto gold = static_cast<Eigen::Index>(example.gold[hi][static_cast<std::size_t>(t)]);
      const double m = logits.col(t).maxCoeff();
      Vector e = (logits.col(t).array() - m).exp().matrix();
      const double z = e.sum();
      loss -= logits(gold, t) - m - std::log(z);
      dlogits.col(t) = e / z;
      dlogits(gold, t) -= 1.0;
    }
    ghead.weights.noalias() += dlogits * tr.features.transpose();
    ghead.bias += dlogits.rowwise().sum();
    dfeat.noalias() += head.weights.transpose() * dlogits;
  }
  if (mask) dfeat.array() *= mask->output.array();

  const auto h = static_cast<Eigen::Index>(params.hidden());
  Matrix dx = Matrix::Zero(tr.x.rows(), cols);
  backprop_direction(params.forward, tr.x, tr.fwd, false, dfeat.topRows(h), grad.forward, dx);
  backprop_direction(params.backward, tr.x, tr.bwd, true, dfeat.bottomRows(h), grad.backward, dx);
  if (mask) dx.array() *= mask->input.array();

  Eigen::Index offset = 0;
  for (std::size_t s = 0; s < params.embeddings.size(); ++s) {
    auto& gtable = grad.embeddings[s].table;
    const auto d = gtable.rows();
    for (Eigen::Index t = 0; t < cols; ++t) {
      const auto id = static_cast<Eigen::Index>(example.input.ids[s][static_cast<std::size_t>(t)]);
      gtable.col(id) += dx.block(offset, t, d, 1);
    }
    offset += d;
  }
  return loss;
}

LossAndGradients loss_and_gradients(const ModelParams& params, std::span<const TrainingExample> batch,
                                    std::span<const DropoutMask> masks) {
  LossAndGradients out{0.0, params.zeros_like()};
  for (std::size_t i = 0; i < batch.size(); ++i)
    out.loss += accumulate_gradients(params, batch[i], masks.empty() ? nullptr : &masks[i], out.gradients);
  return out;
}

double total_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                  std::span<const DropoutMask> masks) {
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    if (ex.input.length() == 0) continue;
    const Trace tr = forward_trace(params, ex.input, masks.empty() ? nullptr : &masks[i]);
    for (std::size_t hi = 0; hi < params.heads.size(); ++hi) {
      const auto& head = params.heads[hi];
      Matrix logits = head.weights * tr.features;
      logits.colwise() += head.bias;
      for (Eigen::Index t = 0; t < logits.cols(); ++t) {
        const auto gold = static_cast<Eigen::Index>(ex.gold[hi][static_cast<std::size_t>(t)]);
        const double m = logits.col(t).maxCoeff();
        loss -= logits(gold, t) - m - std::log((logits.col(t).array() - m).exp().sum());
      }
    }
  }
  return loss;
}

void sgd_step(ModelParams& params, const ModelParams& grad, double learning_rate) {
  const auto gblocks = grad.blocks();
  for (const auto& b : gblocks)
    for (double g : b.values)
      if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in " + b.name);
  auto pblocks = params.blocks();
  if (pblocks.size() != gblocks.size()) throw std::invalid_argument("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < pblocks.size(); ++i) {
    auto& p = pblocks[i];
    const auto& g = gblocks[i].values;
    if (p.values.size() != g.size()) throw std::invalid_argument("sgd_step: shape mismatch in " + p.name);
    for (std::size_t k = p.frozen; k < p.values.size(); ++k) p.values[k] -= learning_rate * g[k];
  }
}

GradientCheckReport gradient_check(const ModelParams& params, const ModelParams& analytic,
                                   std::span<const TrainingExample> batch, double epsilon, double tolerance,
                                   std::span<const DropoutMask> masks) {
  GradientCheckReport report;
  report.tolerance = tolerance;
  ModelParams probe = params;
  auto pblocks = probe.blocks();
  const auto ablocks = analytic.blocks();
  for (std::size_t bi = 0; bi < pblocks.size(); ++bi) {
    BlockCheck check{pblocks[bi].name, pblocks[bi].values.size(), 0.0};
    for (std::size_t k = 0; k < pblocks[bi].values.size(); ++k) {
      double& v = pblocks[bi].values[k];
      const double saved = v;
      v = saved + epsilon;
      const double up = total_loss(probe, batch, masks);
      v = saved - epsilon;
      const double down = total_loss(probe, batch, masks);
      v = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = ablocks[bi].values[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), kRelativeErrorFloor});
      check.max_relative_error = std::max(check.max_relative_error, std::abs(a - numeric) / denom);
    }
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.blocks.push_back(std::move(check));
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

GradientCheckReport gradient_check(const ModelParams& params, std::span<const TrainingExample> batch,
                                   double epsilon, double tolerance, std::span<const DropoutMask> masks) {
  const auto lg = loss_and_gradients(params, batch, masks);
  return gradient_check(params, lg.gradients, batch, epsilon, tolerance, masks);
}

}  // namespace cslot
