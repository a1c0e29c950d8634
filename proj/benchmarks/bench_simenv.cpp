#include <random>

#include <benchmark/benchmark.h>

#include "gcrl/simenv.hpp"

using namespace gcrl::sim;

namespace {

void BM_EnvStep(benchmark::State& state) {
  const auto cfg = EnvConfig::for_variant(static_cast<Variant>(state.range(0)));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto s = reset(cfg, rng).state;
  for (auto _ : state) {
    if (s.step_index >= cfg.episode_len) s = reset(cfg, rng).state;
    const Eigen::Vector4d a(u(rng), u(rng), u(rng), u(rng));
    s = step(s, a, cfg).state;
  }
  state.SetLabel(std::string(to_string(cfg.variant)));
}
BENCHMARK(BM_EnvStep)
    ->Arg(static_cast<int>(Variant::Flat))
    ->Arg(static_cast<int>(Variant::Wall))
    ->Arg(static_cast<int>(Variant::Ditch));

void BM_Episode(benchmark::State& state) {
  const auto cfg = EnvConfig::for_variant(Variant::Wall);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto _ : state) {
    auto s = reset(cfg, rng).state;
    for (int t = 0; t < cfg.episode_len; ++t) {
      s = step(s, Eigen::Vector4d(u(rng), u(rng), u(rng), u(rng)), cfg).state;
    }
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_Episode)->Unit(benchmark::kMillisecond);

}  // namespace
