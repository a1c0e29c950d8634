#include <random>

#include <benchmark/benchmark.h>

#include "gcrl/ddpg.hpp"

using namespace gcrl;

namespace {

TransitionBatch random_batch(int state_dim, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  auto b = TransitionBatch::allocate(state_dim, n);
  const auto fill = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  fill(b.states);
  fill(b.actions);
  fill(b.desired_goals);
  fill(b.achieved_goals);
  fill(b.next_states);
  fill(b.next_achieved_goals);
  for (int i = 0; i < n; ++i) b.rewards(i) = (i % 3 == 0) ? 0.0 : -1.0;
  return b;
}

// One optimizer step as the trainer performs it: targets, critic, actor.
void BM_OptimizerStep(benchmark::State& state) {
  ddpg::Hyperparams hp;
  hp.batch_size = static_cast<int>(state.range(0));
  auto agent = ddpg::make_agent(25, hp, 3);
  std::mt19937_64 rng(5);
  const auto batch = random_batch(25, hp.batch_size, rng);
  for (auto _ : state) {
    const auto y = ddpg::compute_target_q(agent, batch);
    benchmark::DoNotOptimize(ddpg::critic_update(agent, batch, y));
    benchmark::DoNotOptimize(ddpg::actor_update(agent, batch));
  }
}
BENCHMARK(BM_OptimizerStep)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_TargetUpdate(benchmark::State& state) {
  auto agent = ddpg::make_agent(25, {}, 3);
  for (auto _ : state) ddpg::update_targets(agent);
}
BENCHMARK(BM_TargetUpdate);

}  // namespace
