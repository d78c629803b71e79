#include <benchmark/benchmark.h>

#include <numeric>

#include "mam/basis.hpp"
#include "mam/bilevel.hpp"
#include "mam/datagen.hpp"
#include "mam/weightnet.hpp"

namespace {

using namespace mam;

struct Problem {
  Samples train;
  Samples meta;
};

Problem make_problem(std::size_t n, std::size_t p, std::size_t d) {
  const auto ds = gen_regression(n, p, NoiseKind::B, 1);
  Rng rng(2);
  const auto sp = split(ds, {3, 1, 1}, rng, true);
  const auto spec = fit_basis(sp.train.x, d);
  return {make_samples(spec, sp.train), make_samples(spec, sp.meta)};
}

void BM_TransformBatch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ds = gen_regression(n, 100, NoiseKind::gauss, 3);
  const auto spec = fit_basis(ds.x, 6);
  for (auto _ : state) benchmark::DoNotOptimize(transform_batch(spec, ds.x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TransformBatch)->Arg(200)->Arg(2000);

void BM_WeightNetForwardBackward(benchmark::State& state) {
  const auto theta = init_weightnet(static_cast<std::size_t>(state.range(0)), 4);
  double loss = 0.3;
  for (auto _ : state) {
    const auto fwd = v_forward(theta, loss);
    benchmark::DoNotOptimize(v_grad_theta(theta, loss, fwd.cache));
    loss += 1e-9;
  }
}
BENCHMARK(BM_WeightNetForwardBackward)->Arg(10)->Arg(100);

// One virtual step plus one meta step at batch size b.
void BM_BilevelStep(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto prob = make_problem(1000, 100, 6);
  TrainConfig cfg;
  const auto theta = init_weightnet(cfg.hidden, 5);
  const auto beta = AdditiveParams::zeros(100, 6);
  std::vector<std::size_t> idx(b);
  std::iota(idx.begin(), idx.end(), 0);
  for (auto _ : state) {
    const auto vs = virtual_update(beta, theta, prob.train, idx, 0.1, cfg);
    benchmark::DoNotOptimize(
        meta_update(theta, beta, vs.beta_hat, prob.meta, idx, vs.terms, 0.01, 0.1, cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b));
}
BENCHMARK(BM_BilevelStep)->Arg(16)->Arg(64)->Arg(128);

// Full training on the desk-scale regression benchmark.
void BM_Train(benchmark::State& state) {
  const auto prob = make_problem(static_cast<std::size_t>(state.range(0)), 100, 5);
  TrainConfig cfg;
  cfg.iterations = 300;
  cfg.eta_beta0 = 0.02;
  cfg.eta_theta0 = 3e-4;
  cfg.lambda = 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(train(cfg, prob.train, prob.meta));
}
BENCHMARK(BM_Train)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
