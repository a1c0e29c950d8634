#pragma once

#include <cstdint>
#include <random>

#include "gcrl/neuralcore.hpp"
#include "gcrl/transition.hpp"

namespace gcrl::ddpg {

using nn::Matrix;
using nn::Vector;

struct Hyperparams {
  double gamma = 0.98;
  double polyak = 0.95;  // weight on the old target parameters
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double action_l2 = 1.0;
  double max_action = 1.0;
  int batch_size = 256;
  long buffer_capacity = 1'000'000;  // transitions
  int rollout_batch = 2;
  double noise_std = 0.2;  // fraction of max_action
  double random_action_prob = 0.3;
  double obs_clip = 200.0;
  double norm_eps = 0.01;
  double norm_clip = 5.0;
  int hidden_layers = 3;
  int hidden_units = 64;
  int k_future = 4;
  bool use_her = true;
  // Feed the achieved goal to actor and critic alongside the state.
  bool include_achieved_goal = false;

  // Throws ConfigError on out-of-range values.
  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

// Running mean/std from sufficient statistics.
struct Normalizer {
  Vector sum;
  Vector sumsq;
  double count = 0.0;
  double eps = 0.01;
  double clip = 5.0;

  static Normalizer make(Eigen::Index dim, double eps, double clip);

  Eigen::Index dim() const { return sum.size(); }
  Vector mean() const;
  Vector stddev() const;
  bool operator==(const Normalizer& other) const;
};

// Adds every column of `batch` to the statistics.
Normalizer normalizer_update(const Normalizer& norm, const Matrix& batch);
void normalizer_update_inplace(Normalizer& norm, const Matrix& batch);

// clip((x - mean) / std, -clip, clip), column-wise for matrices.
Vector normalize(const Normalizer& norm, const Vector& raw);
Matrix normalize_batch(const Normalizer& norm, const Matrix& raw);

struct AgentParams {
  nn::NetworkParams actor;
  nn::NetworkParams critic;
  nn::NetworkParams actor_target;
  nn::NetworkParams critic_target;

  bool operator==(const AgentParams&) const = default;
};

// Learner-side agent: networks, optimizer state, and input normalizers.
struct Agent {
  Hyperparams hp;
  int state_dim = 0;
  AgentParams nets;
  nn::AdamState actor_opt;
  nn::AdamState critic_opt;
  Normalizer obs_norm;   // over observation features (state, plus achieved goal if enabled)
  Normalizer goal_norm;  // over desired goals

  int feature_dim() const { return state_dim + (hp.include_achieved_goal ? kGoalDim : 0); }
  int actor_input_dim() const { return feature_dim() + kGoalDim; }
  int critic_input_dim() const { return actor_input_dim() + kActionDim; }

  bool operator==(const Agent& other) const;
};

Agent make_agent(int state_dim, const Hyperparams& hp, std::uint64_t seed);

// Observation features before normalization: state (clipped to obs_clip),
// with the achieved goal appended when configured.
Matrix observation_features(const Agent& agent, const Matrix& states,
                            const Matrix& achieved_goals);

// Normalized actor input [features; goal] for raw observations.
Matrix policy_inputs(const Agent& agent, const Matrix& states,
                     const Matrix& achieved_goals, const Matrix& desired_goals);

// max_action * tanh-layer output.
Vector actor_forward(const AgentParams& nets, const Vector& norm_state,
                     const Vector& norm_goal, const Hyperparams& hp);
Matrix actor_forward_batch(const nn::NetworkParams& actor,
                           const Matrix& norm_inputs, const Hyperparams& hp);

Vector select_action(const AgentParams& nets, const Vector& norm_state,
                     const Vector& norm_goal, const Hyperparams& hp,
                     std::mt19937_64& rng, bool explore);

// Applies exploration to a batch of greedy actions (one per column).
void explore_actions(Matrix& actions, const Hyperparams& hp,
                     std::mt19937_64& rng);

// r + gamma * Q_target(s', g, pi_target(s', g)), clipped to
// [-1/(1-gamma), 0].
Vector compute_target_q(const Agent& agent, const TransitionBatch& batch);

// Target values from already computed next-state target Q values.
Vector clip_targets(const Vector& rewards, const Vector& next_q, double gamma);

// One Adam step on mean (Q(s,g,a) - y)^2. Returns the pre-update loss.
double critic_update(Agent& agent, const TransitionBatch& batch,
                     const Vector& targets);

// One Adam step on -mean Q(s,g,pi) + action_l2 * mean((pi/max)^2).
// Returns the pre-update loss.
double actor_update(Agent& agent, const TransitionBatch& batch);

// Loss values only, no update. Used by tests and diagnostics.
double critic_loss(const Agent& agent, const TransitionBatch& batch,
                   const Vector& targets);
double actor_loss(const Agent& agent, const TransitionBatch& batch);

// target' = polyak * target + (1 - polyak) * main.
nn::NetworkParams polyak_update(const nn::NetworkParams& main,
                                const nn::NetworkParams& target, double polyak);
void polyak_update_inplace(const nn::NetworkParams& main,
                           nn::NetworkParams& target, double polyak);

void update_targets(Agent& agent);

}  // namespace gcrl::ddpg
