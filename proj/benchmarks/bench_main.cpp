#include <benchmark/benchmark.h>

#include "urie/corruptions.hpp"
#include "urie/layers.hpp"
#include "urie/ops.hpp"
#include "urie/optim.hpp"
#include "urie/sem.hpp"
#include "urie/urie_net.hpp"

namespace {

using namespace urie;

Tensor uniform(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (double& v : t.values()) v = rng.uniform(0.0, 1.0);
  return t;
}

void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(1);
  const Conv2dParams p = Conv2dParams::init(c, c, 3, 1, 1, rng);
  const Var x(uniform({4, c, 32, 32}, 2));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, p).value().data());
  state.SetItemsProcessed(state.iterations() * 4LL * 32 * 32 * c * c * 9);
}
BENCHMARK(BM_Conv2d)->Arg(16)->Arg(32)->Arg(64);

void BM_SemForward(benchmark::State& state) {
  Rng rng(3);
  SemParams p = SemParams::init(32, 64, kDefaultReductionRatio, NormKind::kInstance,
                                NormKind::kBatch, rng);
  const Var x(uniform({8, 32, 16, 16}, 4));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(sem_forward(x, p).value().data());
}
BENCHMARK(BM_SemForward);

void BM_UrieForward(benchmark::State& state) {
  const UrieConfig cfg;
  UrieParams p = UrieParams::init(cfg, 5);
  p.set_mode(NormMode::kEval);
  const Var x(uniform({16, 3, 32, 32}, 6));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(urie_forward(x, p, cfg).value().data());
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_UrieForward)->Unit(benchmark::kMillisecond);

void BM_UrieForwardBackward(benchmark::State& state) {
  const UrieConfig cfg;
  UrieParams p = UrieParams::init(cfg, 7);
  const Tensor x = uniform({16, 3, 32, 32}, 8);
  for (auto _ : state) {
    Var loss = mean(urie_forward(Var(x), p, cfg));
    backward(loss);
    zero_grads(p.named_parameters());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_UrieForwardBackward)->Unit(benchmark::kMillisecond);

void BM_Corrupt(benchmark::State& state) {
  const auto kind = static_cast<CorruptionKind>(state.range(0));
  const Tensor img = uniform({1, 3, 32, 32}, 9);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(corrupt(img, {kind, 3, seed++}).data());
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_Corrupt)->DenseRange(static_cast<int>(CorruptionKind::kGaussianNoise),
                                  static_cast<int>(CorruptionKind::kFog));

}  // namespace

BENCHMARK_MAIN();
