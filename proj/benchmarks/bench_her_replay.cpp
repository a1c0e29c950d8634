#include <random>

#include <benchmark/benchmark.h>

#include "gcrl/her_replay.hpp"

using namespace gcrl;

namespace {

her::StoredEpisode synthetic_episode(int state_dim, std::mt19937_64& rng) {
  constexpr int T = her::kEpisodeLength;
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  her::StoredEpisode ep;
  ep.states = Eigen::MatrixXd::NullaryExpr(state_dim, T + 1, [&] { return u(rng); });
  ep.achieved_goals = Eigen::MatrixXd::NullaryExpr(3, T + 1, [&] { return u(rng); });
  ep.desired_goals = Eigen::MatrixXd::NullaryExpr(3, T, [&] { return u(rng); });
  ep.actions = Eigen::MatrixXd::NullaryExpr(4, T, [&] { return u(rng); });
  ep.rewards.resize(T);
  for (int t = 0; t < T; ++t) {
    ep.rewards(t) = her::recompute_reward(ep.achieved_goals.col(t + 1), ep.desired_goals.col(t));
  }
  return ep;
}

void BM_SampleBatch(benchmark::State& state) {
  std::mt19937_64 rng(2);
  her::ReplayBuffer buf(1'000'000, 25);
  for (int i = 0; i < state.range(0); ++i) buf.store(synthetic_episode(25, rng));
  for (auto _ : state) benchmark::DoNotOptimize(buf.sample_batch(256, 4, rng));
}
BENCHMARK(BM_SampleBatch)->Arg(100)->Arg(5000);

void BM_Store(benchmark::State& state) {
  std::mt19937_64 rng(3);
  her::ReplayBuffer buf(60 * 1000, 25);
  const auto ep = synthetic_episode(25, rng);
  for (auto _ : state) buf.store(ep);
}
BENCHMARK(BM_Store);

}  // namespace
