#include "gcrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "gcrl/errors.hpp"
#include "gcrl/her_replay.hpp"
#include "json_io.hpp"
#include "text_util.hpp"

namespace gcrl::train {

using detail::Json;

namespace {

constexpr int kEvalGroup = 16;

struct Rollouts {
  std::vector<her::StoredEpisode> episodes;
  std::vector<double> returns;
  std::vector<bool> successes;
};

// Runs `seeds.size()` episodes in lockstep so the actor is evaluated on one
// batch per step. Each episode owns an RNG stream derived from its seed, so
// results do not depend on how episodes are grouped across workers.
Rollouts run_group(const ddpg::Agent& agent, const sim::EnvConfig& env,
                   const std::vector<std::uint64_t>& seeds, bool explore,
                   std::vector<analysis::EpisodeLog>* logs) {
  const int n = static_cast<int>(seeds.size());
  const int T = env.episode_len;
  const int S = env.state_dim();
  const ddpg::Hyperparams& hp = agent.hp;

  std::vector<std::mt19937_64> rngs;
  std::vector<sim::SimState> states;
  Rollouts out;
  out.episodes.resize(static_cast<std::size_t>(n));
  out.returns.assign(static_cast<std::size_t>(n), 0.0);
  out.successes.assign(static_cast<std::size_t>(n), false);
  if (logs) logs->resize(static_cast<std::size_t>(n));

  Eigen::MatrixXd obs(S, n), achieved(3, n), desired(3, n);
  for (int i = 0; i < n; ++i) {
    rngs.emplace_back(seeds[static_cast<std::size_t>(i)]);
    auto r = sim::reset(env, rngs.back());
    auto& ep = out.episodes[static_cast<std::size_t>(i)];
    ep.states.resize(S, T + 1);
    ep.achieved_goals.resize(3, T + 1);
    ep.desired_goals.resize(3, T);
    ep.actions.resize(4, T);
    ep.rewards.resize(T);
    ep.env_id = std::string(sim::to_string(env.variant));
    ep.seed = seeds[static_cast<std::size_t>(i)];
    ep.states.col(0) = r.obs.state;
    ep.achieved_goals.col(0) = r.obs.achieved_goal;
    obs.col(i) = r.obs.state;
    achieved.col(i) = r.obs.achieved_goal;
    desired.col(i) = r.obs.desired_goal;
    if (logs) {
      auto& log = (*logs)[static_cast<std::size_t>(i)];
      log.variant = ep.env_id;
      log.seed = ep.seed;
      log.target = r.state.target;
      log.box_start = r.state.box_pos;
      log.steps.reserve(static_cast<std::size_t>(T));
    }
    states.push_back(std::move(r.state));
  }

  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd inputs = ddpg::policy_inputs(agent, obs, achieved, desired);
    Eigen::MatrixXd actions = ddpg::actor_forward_batch(agent.nets.actor, inputs, hp);
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (explore) {
        Eigen::MatrixXd a = actions.col(i);
        ddpg::explore_actions(a, hp, rngs[k]);
        actions.col(i) = a;
      }
      const Eigen::Vector4d scaled = actions.col(i) / hp.max_action;
      auto res = sim::step(states[k], scaled, env);
      auto& ep = out.episodes[k];
      ep.actions.col(t) = actions.col(i);
      ep.desired_goals.col(t) = desired.col(i);
      ep.rewards(t) = res.reward;
      ep.states.col(t + 1) = res.obs.state;
      ep.achieved_goals.col(t + 1) = res.obs.achieved_goal;
      out.returns[k] += res.reward;
      if (t == T - 1) out.successes[k] = res.info.is_success;
      if (logs) {
        analysis::StepRecord rec;
        rec.step = t;
        rec.gripper_pos = res.state.gripper_pos;
        rec.finger_gap = res.state.finger_gap();
        rec.box_pos = res.state.box_pos;
        rec.box_vel = res.state.box_vel;
        rec.action = scaled;
        rec.reward = res.reward;
        rec.gripper_box_contact = res.info.gripper_box_contact;
        rec.grasped = res.info.grasped;
        (*logs)[k].steps.push_back(rec);
      }
      obs.col(i) = res.obs.state;
      achieved.col(i) = res.obs.achieved_goal;
      states[k] = std::move(res.state);
    }
  }
  return out;
}

// Runs every group, spreading them over `workers` threads with a fixed
// assignment, and returns the results in group order.
std::vector<Rollouts> run_groups(const ddpg::Agent& agent, const sim::EnvConfig& env,
                                 const std::vector<std::vector<std::uint64_t>>& groups,
                                 bool explore, int workers) {
  std::vector<Rollouts> results(groups.size());
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(groups.size())));
  if (w == 1) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      results[g] = run_group(agent, env, groups[g], explore, nullptr);
    }
    return results;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
  std::vector<std::thread> threads;
  for (int id = 0; id < w; ++id) {
    threads.emplace_back([&, id] {
      try {
        for (std::size_t g = static_cast<std::size_t>(id); g < groups.size();
             g += static_cast<std::size_t>(w)) {
          results[g] = run_group(agent, env, groups[g], explore, nullptr);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(id)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

void update_normalizers(ddpg::Agent& agent, const std::vector<her::StoredEpisode>& fresh,
                        std::mt19937_64& rng) {
  std::vector<const her::StoredEpisode*> view;
  view.reserve(fresh.size());
  for (const auto& ep : fresh) view.push_back(&ep);
  const int samples = static_cast<int>(fresh.size()) * fresh.front().length();
  const int k = agent.hp.use_her ? agent.hp.k_future : 0;
  const TransitionBatch batch = her::sample_transitions(view, samples, k, rng);
  ddpg::normalizer_update_inplace(
      agent.obs_norm, ddpg::observation_features(agent, batch.states, batch.achieved_goals));
  ddpg::normalizer_update_inplace(agent.goal_norm, batch.desired_goals);
}

}  // namespace

void TrainConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  env.validate();
  hp.validate();
  require(epochs >= 0, "epochs must be >= 0");
  require(cycles_per_epoch >= 1, "cycles_per_epoch must be >= 1");
  require(episodes_per_cycle >= 1, "episodes_per_cycle must be >= 1");
  require(episodes_per_cycle >= hp.rollout_batch, "episodes_per_cycle must be >= rollout_batch");
  require(optimizer_steps_per_cycle >= 1, "optimizer_steps_per_cycle must be >= 1");
  require(eval_episodes >= 1, "eval_episodes must be >= 1");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(total_step_budget >= 0, "total_step_budget must be >= 0");
  require(workers >= 1, "workers must be >= 1");
  require(hp.buffer_capacity >= env.episode_len, "buffer_capacity must hold one episode");
}

TrainConfig load_train_config(std::string_view json_text, sim::Variant variant) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  c.env = sim::EnvConfig::for_variant(variant);
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      static const char* const keys[] = {
          "epochs",       "cycles_per_epoch", "episodes_per_cycle", "optimizer_steps_per_cycle",
          "eval_episodes", "checkpoint_every", "total_step_budget", "workers",
          "wall_clock",   "seed",             "hyperparams",        "env"};
      if (std::find(std::begin(keys), std::end(keys), it.key()) == std::end(keys)) {
        throw ConfigError("unknown train config key '" + it.key() + "'");
      }
    }
    const auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("epochs", c.epochs);
    get("cycles_per_epoch", c.cycles_per_epoch);
    get("episodes_per_cycle", c.episodes_per_cycle);
    get("optimizer_steps_per_cycle", c.optimizer_steps_per_cycle);
    get("eval_episodes", c.eval_episodes);
    get("checkpoint_every", c.checkpoint_every);
    get("total_step_budget", c.total_step_budget);
    get("workers", c.workers);
    get("wall_clock", c.wall_clock);
    get("seed", c.seed);
    if (j.contains("hyperparams")) c.hp = detail::hyperparams_from_json(j.at("hyperparams"));
    if (j.contains("env")) {
      Json env = j.at("env");
      const std::string name(sim::to_string(variant));
      if (env.contains("variant") && env.at("variant") != name) {
        throw ConfigError("env.variant '" + env.at("variant").get<std::string>() +
                          "' conflicts with --env " + name);
      }
      env["variant"] = name;
      c.env = sim::load_env_config(env.dump());
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config_file(const std::string& path, sim::Variant variant) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open train config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return load_train_config(text.str(), variant);
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  const Json j{{"env", Json::parse(sim::to_json(cfg.env))},
               {"hyperparams", detail::hyperparams_to_json(cfg.hp)},
               {"epochs", cfg.epochs},
               {"cycles_per_epoch", cfg.cycles_per_epoch},
               {"episodes_per_cycle", cfg.episodes_per_cycle},
               {"optimizer_steps_per_cycle", cfg.optimizer_steps_per_cycle},
               {"eval_episodes", cfg.eval_episodes},
               {"total_step_budget", cfg.total_step_budget},
               {"seed", cfg.seed}};
  return fnv1a(j.dump());
}

std::string metrics_csv_header() {
  return "epoch,env_steps,train_success_rate,eval_success_rate,mean_episode_reward,"
         "actor_loss,critic_loss,wall_clock_s";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  using detail::format_double;
  return std::to_string(m.epoch) + "," + std::to_string(m.env_steps) + "," +
         format_double(m.train_success_rate) + "," + format_double(m.eval_success_rate) + "," +
         format_double(m.mean_episode_reward) + "," + format_double(m.actor_loss) + "," +
         format_double(m.critic_loss) + "," + format_double(m.wall_clock_s);
}

EvalResult evaluate(const ddpg::Agent& agent, const sim::EnvConfig& env, int episodes,
                    std::uint64_t seed, const LogSink& sink) {
  if (episodes <= 0) throw StateError("evaluation needs at least one episode");
  if (agent.state_dim != env.state_dim()) {
    throw ConfigError("agent expects state_dim " + std::to_string(agent.state_dim) +
                      " but environment '" + std::string(sim::to_string(env.variant)) +
                      "' provides " + std::to_string(env.state_dim()));
  }
  env.validate();
  EvalResult r;
  r.episodes = episodes;
  int successes = 0;
  double reward_sum = 0.0;
  for (int first = 0; first < episodes; first += kEvalGroup) {
    const int n = std::min(kEvalGroup, episodes - first);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < n; ++i) {
      seeds.push_back(detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(first + i))));
    }
    std::vector<analysis::EpisodeLog> logs;
    const Rollouts out = run_group(agent, env, seeds, false, sink ? &logs : nullptr);
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      successes += out.successes[k] ? 1 : 0;
      reward_sum += out.returns[k];
      if (sink) {
        logs[k].episode_index = static_cast<std::uint64_t>(first + i);
        sink(logs[k]);
      }
    }
  }
  r.success_rate = static_cast<double>(successes) / episodes;
  r.mean_reward = reward_sum / episodes;
  return r;
}

EvalResult evaluate(const Checkpoint& ckpt, const sim::EnvConfig& env, int episodes,
                    std::uint64_t seed, const LogSink& sink) {
  return evaluate(ckpt.agent, env, episodes, seed, sink);
}

TrainResult run_training(const TrainConfig& cfg, const Checkpoint* resume,
                         const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t hash = config_hash(cfg);
  const int S = cfg.env.state_dim();
  const int T = cfg.env.episode_len;

  Checkpoint state;
  std::mt19937_64 rng(cfg.seed);
  if (resume) {
    state = *resume;
    if (state.agent.state_dim != S) {
      throw ConfigError("checkpoint state_dim " + std::to_string(state.agent.state_dim) +
                        " does not match environment state_dim " + std::to_string(S));
    }
    const ddpg::Hyperparams& old = state.agent.hp;
    if (old.hidden_layers != cfg.hp.hidden_layers || old.hidden_units != cfg.hp.hidden_units ||
        old.include_achieved_goal != cfg.hp.include_achieved_goal) {
      throw ConfigError("checkpoint network shape does not match the configured hyperparams");
    }
    state.agent.hp = cfg.hp;
    rng = detail::rng_from_state(state.rng_state);
  } else {
    state.agent = ddpg::make_agent(S, cfg.hp, cfg.seed);
  }
  state.env = cfg.env;
  state.config_hash = hash;
  ddpg::Agent& agent = state.agent;

  std::ofstream metrics_out;
  std::filesystem::path out_dir;
  if (!cfg.output_dir.empty()) {
    out_dir = cfg.output_dir;
    std::filesystem::create_directories(out_dir);
    metrics_out.open(out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!metrics_out) throw Error("cannot write " + (out_dir / "metrics.csv").string());
    metrics_out << metrics_csv_header() << detail::kCsvEol << std::flush;
  }
  const auto write_checkpoint = [&](const char* name) {
    if (out_dir.empty()) return;
    state.rng_state = detail::rng_state(rng);
    save_checkpoint_file(state, (out_dir / name).string());
  };

  her::ReplayBuffer buffer(cfg.hp.buffer_capacity, S, T);
  const int k_future = cfg.hp.use_her ? cfg.hp.k_future : 0;
  const int first_epoch = state.epoch + 1;
  // Same evaluation episodes every epoch, so epochs compare on equal terms.
  const std::uint64_t eval_seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
  TrainResult result;

  for (int epoch = first_epoch; epoch < first_epoch + cfg.epochs; ++epoch) {
    if (cfg.total_step_budget > 0 && state.env_steps >= cfg.total_step_budget) break;
    int train_episodes = 0;
    int train_successes = 0;
    double actor_loss_sum = 0.0;
    double critic_loss_sum = 0.0;
    long loss_count = 0;

    for (int cycle = 0; cycle < cfg.cycles_per_epoch; ++cycle) {
      if (cfg.total_step_budget > 0 && state.env_steps >= cfg.total_step_budget) break;
      const sim::EnvConfig env = sim::apply_variant_rule(cfg.env, state.env_steps);
      std::vector<std::vector<std::uint64_t>> groups;
      for (int e = 0; e < cfg.episodes_per_cycle; e += cfg.hp.rollout_batch) {
        const int n = std::min(cfg.hp.rollout_batch, cfg.episodes_per_cycle - e);
        std::vector<std::uint64_t> seeds;
        for (int i = 0; i < n; ++i) seeds.push_back(rng());
        groups.push_back(std::move(seeds));
      }
      std::vector<Rollouts> rollouts = run_groups(agent, env, groups, true, cfg.workers);

      std::vector<her::StoredEpisode> fresh;
      for (auto& r : rollouts) {
        for (std::size_t i = 0; i < r.episodes.size(); ++i) {
          train_successes += r.successes[i] ? 1 : 0;
          ++train_episodes;
          fresh.push_back(std::move(r.episodes[i]));
        }
      }
      state.env_steps += static_cast<long long>(fresh.size()) * T;
      for (const auto& ep : fresh) buffer.store(ep);
      update_normalizers(agent, fresh, rng);

      try {
        for (int s = 0; s < cfg.optimizer_steps_per_cycle; ++s) {
          const TransitionBatch batch = buffer.sample_batch(cfg.hp.batch_size, k_future, rng);
          const Eigen::VectorXd targets = ddpg::compute_target_q(agent, batch);
          critic_loss_sum += ddpg::critic_update(agent, batch, targets);
          actor_loss_sum += ddpg::actor_update(agent, batch);
          ++loss_count;
        }
      } catch (const NumericError&) {
        state.epoch = epoch - 1;
        write_checkpoint("checkpoint_abort.json");
        throw;
      }
      ddpg::update_targets(agent);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.env_steps = state.env_steps;
    m.train_success_rate =
        train_episodes > 0 ? static_cast<double>(train_successes) / train_episodes : 0.0;
    const sim::EnvConfig eval_env = sim::apply_variant_rule(cfg.env, state.env_steps);
    const EvalResult eval = evaluate(agent, eval_env, cfg.eval_episodes, eval_seed);
    m.eval_success_rate = eval.success_rate;
    m.mean_episode_reward = eval.mean_reward;
    m.actor_loss = loss_count > 0 ? actor_loss_sum / static_cast<double>(loss_count) : 0.0;
    m.critic_loss = loss_count > 0 ? critic_loss_sum / static_cast<double>(loss_count) : 0.0;
    if (cfg.wall_clock) {
      m.wall_clock_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    state.epoch = epoch;
    result.metrics.push_back(m);
    if (metrics_out.is_open()) {
      metrics_out << metrics_csv_row(m) << detail::kCsvEol << std::flush;
      if (!metrics_out) throw Error("failed writing metrics.csv");
    }
    if (cfg.checkpoint_every > 0 && (epoch - first_epoch + 1) % cfg.checkpoint_every == 0) {
      write_checkpoint("checkpoint.json");
    }
    if (on_epoch) on_epoch(m);
  }

  state.rng_state = detail::rng_state(rng);
  write_checkpoint("checkpoint.json");
  result.checkpoint = state;
  return result;
}

}  // namespace gcrl::train
