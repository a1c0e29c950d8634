#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gcrl/checkpoint.hpp"
#include "gcrl/ddpg.hpp"
#include "gcrl/episode_log.hpp"
#include "gcrl/simenv.hpp"

namespace gcrl::train {

struct TrainConfig {
  sim::EnvConfig env = sim::EnvConfig::for_variant(sim::Variant::Wall);
  ddpg::Hyperparams hp;
  int epochs = 50;
  int cycles_per_epoch = 50;
  int episodes_per_cycle = 2;
  int optimizer_steps_per_cycle = 40;
  int eval_episodes = 10;
  std::uint64_t seed = 0;
  std::string output_dir;      // empty: nothing is written
  int checkpoint_every = 1;    // epochs; 0 writes only the final checkpoint
  long long total_step_budget = 0;  // environment steps; 0 means unlimited
  int workers = 1;             // rollout threads
  // Record elapsed time in the metrics. Off, the column holds 0 and the CSV
  // depends only on the seed.
  bool wall_clock = true;

  void validate() const;
};

// Reads schedule keys, an optional "hyperparams" object and an optional
// "env" object. `variant` selects the environment defaults the "env"
// object is applied to. Throws ConfigError.
TrainConfig load_train_config(std::string_view json_text, sim::Variant variant);
TrainConfig load_train_config_file(const std::string& path, sim::Variant variant);

// Stable 64-bit hash of everything that influences training results.
std::uint64_t config_hash(const TrainConfig& cfg);

struct EpochMetrics {
  int epoch = 0;
  long long env_steps = 0;
  double train_success_rate = 0.0;
  double eval_success_rate = 0.0;
  double mean_episode_reward = 0.0;  // greedy evaluation, same episodes every epoch
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double wall_clock_s = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  Checkpoint checkpoint;
};

// Writes metrics.csv and checkpoint.json into cfg.output_dir when it is set.
// A non-finite loss saves checkpoint_abort.json and rethrows NumericError.
TrainResult run_training(const TrainConfig& cfg, const Checkpoint* resume = nullptr,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {});

struct EvalResult {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_reward = 0.0;
};

using LogSink = std::function<void(const analysis::EpisodeLog&)>;

// Greedy rollouts without exploration noise. Throws StateError for
// episodes <= 0 and ConfigError when the agent does not fit the env.
EvalResult evaluate(const ddpg::Agent& agent, const sim::EnvConfig& env, int episodes,
                    std::uint64_t seed, const LogSink& sink = {});
EvalResult evaluate(const Checkpoint& ckpt, const sim::EnvConfig& env, int episodes,
                    std::uint64_t seed, const LogSink& sink = {});

}  // namespace gcrl::train
