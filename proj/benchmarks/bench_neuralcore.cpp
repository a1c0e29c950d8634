#include <benchmark/benchmark.h>

#include "gcrl/neuralcore.hpp"

using namespace gcrl::nn;

namespace {

NetworkParams mlp(int in, int units, int out) {
  return init_network({in, units, units, units, out},
                      {Activation::ReLU, Activation::ReLU, Activation::ReLU, Activation::Tanh}, 1);
}

void BM_ForwardBatch(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const auto net = mlp(28, 64, 4);
  const Matrix x = Matrix::Random(28, batch);
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(net, x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBatch)->Arg(1)->Arg(16)->Arg(256);

void BM_ForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const auto net = mlp(32, 64, 1);
  const Matrix x = Matrix::Random(32, batch);
  const Matrix up = Matrix::Ones(1, batch);
  for (auto _ : state) {
    const auto cache = forward_cached(net, x);
    benchmark::DoNotOptimize(backward_batch(net, cache, up));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(256);

void BM_AdamStep(benchmark::State& state) {
  auto net = mlp(32, 64, 1);
  auto opt = make_adam(net, 1e-3);
  const Matrix x = Matrix::Random(32, 256);
  const auto grads = backward_batch(net, forward_cached(net, x), Matrix::Ones(1, 256));
  for (auto _ : state) adam_step_inplace(net, grads, opt);
}
BENCHMARK(BM_AdamStep);

}  // namespace
