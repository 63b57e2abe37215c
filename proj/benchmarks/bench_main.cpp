#include <benchmark/benchmark.h>

#include "cslot/eval.hpp"
#include "cslot/models.hpp"
#include "cslot/neural.hpp"
#include "cslot/synthetic.hpp"

using namespace cslot;

namespace {

TrainingExample example(std::size_t len, std::size_t vocab, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  TrainingExample ex;
  ex.input.ids.resize(1);
  ex.gold.resize(1);
  for (std::size_t t = 0; t < len; ++t) {
    ex.input.ids[0].push_back(rng.index(vocab));
    ex.gold[0].push_back(rng.index(classes));
  }
  return ex;
}

std::vector<std::string> labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

void BM_BlstmForward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto params = init_params({{500}, {hidden}, hidden, {labels(51)}}, 1);
  const auto ex = example(12, 500, 51, 2);
  for (auto _ : state) benchmark::DoNotOptimize(blstm_forward(params, ex.input));
}
BENCHMARK(BM_BlstmForward)->Arg(32)->Arg(100);

void BM_SgdUpdate(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  auto params = init_params({{500}, {hidden}, hidden, {labels(51)}}, 1);
  const auto ex = example(12, 500, 51, 2);
  auto grad = params.zeros_like();
  for (auto _ : state) {
    grad.set_zero();
    benchmark::DoNotOptimize(accumulate_gradients(params, ex, nullptr, grad));
    sgd_step(params, grad, 1e-4);
  }
}
BENCHMARK(BM_SgdUpdate)->Arg(32)->Arg(100);

void BM_DecodeAcd(benchmark::State& state) {
  const auto raw = generate_synthetic(default_flight_grammar(), default_flight_ontology(), 200, 3);
  auto [pp, vocab] = preprocess(raw);
  const auto model = make_model(ModelKind::ACD2, default_flight_ontology(), vocab, {32, 32, 8, 0.2}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(decode_corpus(model, pp));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * pp.size()));
}
BENCHMARK(BM_DecodeAcd);

void BM_Evaluate(benchmark::State& state) {
  const auto ref = generate_synthetic(default_flight_grammar(), default_flight_ontology(), 2000, 5);
  const auto pred = generate_synthetic(default_flight_grammar(), default_flight_ontology(), 2000, 5);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(ref, pred));
}
BENCHMARK(BM_Evaluate);

}  // namespace

BENCHMARK_MAIN();
