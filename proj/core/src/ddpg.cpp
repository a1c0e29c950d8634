#include "gcrl/ddpg.hpp"

#include <cmath>

#include "gcrl/errors.hpp"
#include "json_io.hpp"

namespace gcrl::ddpg {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::vector<int> hidden_sizes(int input, int output, const Hyperparams& hp) {
  std::vector<int> sizes{input};
  for (int i = 0; i < hp.hidden_layers; ++i) sizes.push_back(hp.hidden_units);
  sizes.push_back(output);
  return sizes;
}

std::vector<nn::Activation> hidden_acts(const Hyperparams& hp,
                                        nn::Activation out) {
  std::vector<nn::Activation> acts(static_cast<std::size_t>(hp.hidden_layers),
                                   nn::Activation::ReLU);
  acts.push_back(out);
  return acts;
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix m(top.rows() + bottom.rows(), top.cols());
  m.topRows(top.rows()) = top;
  m.bottomRows(bottom.rows()) = bottom;
  return m;
}

Matrix critic_inputs(const Matrix& policy_in, const Matrix& unit_actions) {
  return stack(policy_in, unit_actions);
}

}  // namespace

void Hyperparams::validate() const {
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(polyak >= 0.0 && polyak <= 1.0, "polyak must lie in [0, 1]");
  require(lr_actor > 0.0 && lr_critic > 0.0, "learning rates must be > 0");
  require(action_l2 >= 0.0, "action_l2 must be >= 0");
  require(max_action > 0.0, "max_action must be > 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(buffer_capacity >= 1, "buffer_capacity must be >= 1");
  require(rollout_batch >= 1, "rollout_batch must be >= 1");
  require(noise_std >= 0.0, "noise_std must be >= 0");
  require(random_action_prob >= 0.0 && random_action_prob <= 1.0,
          "random_action_prob must lie in [0, 1]");
  require(obs_clip > 0.0, "obs_clip must be > 0");
  require(norm_eps > 0.0, "norm_eps must be > 0");
  require(norm_clip > 0.0, "norm_clip must be > 0");
  require(hidden_layers >= 0 && hidden_units >= 1, "invalid hidden layer shape");
  require(k_future >= 0, "k_future must be >= 0");
}

Normalizer Normalizer::make(Eigen::Index dim, double eps, double clip) {
  if (!(eps > 0.0) || !(clip > 0.0)) {
    throw ConfigError("normalizer eps and clip must be > 0");
  }
  Normalizer n;
  n.sum = Vector::Zero(dim);
  n.sumsq = Vector::Zero(dim);
  n.count = 0.0;
  n.eps = eps;
  n.clip = clip;
  return n;
}

Vector Normalizer::mean() const {
  if (count <= 0.0) return Vector::Zero(sum.size());
  return sum / count;
}

Vector Normalizer::stddev() const {
  const Vector m = mean();
  Vector var = Vector::Zero(sum.size());
  if (count > 0.0) var = sumsq / count - m.cwiseProduct(m);
  return var.cwiseMax(eps * eps).cwiseSqrt();
}

bool Normalizer::operator==(const Normalizer& o) const {
  return nn::exactly_equal(sum, o.sum) && nn::exactly_equal(sumsq, o.sumsq) &&
         count == o.count && eps == o.eps && clip == o.clip;
}

void normalizer_update_inplace(Normalizer& norm, const Matrix& batch) {
  if (batch.rows() != norm.dim()) {
    throw ShapeError("normalizer expects dimension " +
                     std::to_string(norm.dim()) + ", got " +
                     std::to_string(batch.rows()));
  }
  norm.sum += batch.rowwise().sum();
  norm.sumsq += batch.cwiseProduct(batch).rowwise().sum();
  norm.count += static_cast<double>(batch.cols());
}

Normalizer normalizer_update(const Normalizer& norm, const Matrix& batch) {
  Normalizer out = norm;
  normalizer_update_inplace(out, batch);
  return out;
}

Matrix normalize_batch(const Normalizer& norm, const Matrix& raw) {
  if (raw.rows() != norm.dim()) {
    throw ShapeError("normalize: dimension mismatch");
  }
  const Vector m = norm.mean();
  const Vector inv = norm.stddev().cwiseInverse();
  Matrix out = (raw.colwise() - m).array().colwise() * inv.array();
  return out.cwiseMax(-norm.clip).cwiseMin(norm.clip);
}

Vector normalize(const Normalizer& norm, const Vector& raw) {
  return normalize_batch(norm, raw).col(0);
}

bool Agent::operator==(const Agent& o) const {
  return hp == o.hp && state_dim == o.state_dim && nets == o.nets &&
         actor_opt == o.actor_opt && critic_opt == o.critic_opt &&
         obs_norm == o.obs_norm && goal_norm == o.goal_norm;
}

Agent make_agent(int state_dim, const Hyperparams& hp, std::uint64_t seed) {
  hp.validate();
  if (state_dim < 1) throw ConfigError("state_dim must be >= 1");
  Agent a;
  a.hp = hp;
  a.state_dim = state_dim;
  a.nets.actor = nn::init_network(hidden_sizes(a.actor_input_dim(), kActionDim, hp),
                                  hidden_acts(hp, nn::Activation::Tanh), seed);
  a.nets.critic = nn::init_network(hidden_sizes(a.critic_input_dim(), 1, hp),
                                   hidden_acts(hp, nn::Activation::Identity),
                                   seed + 0x9E3779B97F4A7C15ULL);
  a.nets.actor_target = a.nets.actor;
  a.nets.critic_target = a.nets.critic;
  a.actor_opt = nn::make_adam(a.nets.actor, hp.lr_actor);
  a.critic_opt = nn::make_adam(a.nets.critic, hp.lr_critic);
  a.obs_norm = Normalizer::make(a.feature_dim(), hp.norm_eps, hp.norm_clip);
  a.goal_norm = Normalizer::make(kGoalDim, hp.norm_eps, hp.norm_clip);
  return a;
}

Matrix observation_features(const Agent& agent, const Matrix& states,
                            const Matrix& achieved_goals) {
  if (states.rows() != agent.state_dim) {
    throw ShapeError("state dimension " + std::to_string(states.rows()) +
                     " does not match agent (" +
                     std::to_string(agent.state_dim) + ")");
  }
  const double c = agent.hp.obs_clip;
  if (!agent.hp.include_achieved_goal) return states.cwiseMax(-c).cwiseMin(c);
  return stack(states, achieved_goals).cwiseMax(-c).cwiseMin(c);
}

Matrix policy_inputs(const Agent& agent, const Matrix& states,
                     const Matrix& achieved_goals, const Matrix& desired_goals) {
  const double c = agent.hp.obs_clip;
  const Matrix features =
      normalize_batch(agent.obs_norm, observation_features(agent, states, achieved_goals));
  const Matrix goals =
      normalize_batch(agent.goal_norm, desired_goals.cwiseMax(-c).cwiseMin(c));
  return stack(features, goals);
}

Matrix actor_forward_batch(const nn::NetworkParams& actor,
                           const Matrix& norm_inputs, const Hyperparams& hp) {
  return hp.max_action * nn::forward_batch(actor, norm_inputs);
}

Vector actor_forward(const AgentParams& nets, const Vector& norm_state,
                     const Vector& norm_goal, const Hyperparams& hp) {
  Vector in(norm_state.size() + norm_goal.size());
  in << norm_state, norm_goal;
  return hp.max_action * nn::forward(nets.actor, in);
}

void explore_actions(Matrix& actions, const Hyperparams& hp,
                     std::mt19937_64& rng) {
  const double m = hp.max_action;
  std::bernoulli_distribution coin(hp.random_action_prob);
  std::uniform_real_distribution<double> uniform(-m, m);
  for (Eigen::Index c = 0; c < actions.cols(); ++c) {
    if (coin(rng)) {
      for (Eigen::Index r = 0; r < actions.rows(); ++r) actions(r, c) = uniform(rng);
      continue;
    }
    if (hp.noise_std > 0.0) {
      std::normal_distribution<double> noise(0.0, hp.noise_std * m);
      for (Eigen::Index r = 0; r < actions.rows(); ++r) actions(r, c) += noise(rng);
    }
    actions.col(c) = actions.col(c).cwiseMax(-m).cwiseMin(m);
  }
}

Vector select_action(const AgentParams& nets, const Vector& norm_state,
                     const Vector& norm_goal, const Hyperparams& hp,
                     std::mt19937_64& rng, bool explore) {
  Matrix a = actor_forward(nets, norm_state, norm_goal, hp);
  if (explore) explore_actions(a, hp, rng);
  return a.col(0);
}

Vector clip_targets(const Vector& rewards, const Vector& next_q, double gamma) {
  const double lower = -1.0 / (1.0 - gamma);
  return (rewards + gamma * next_q).cwiseMax(lower).cwiseMin(0.0);
}

Vector compute_target_q(const Agent& agent, const TransitionBatch& batch) {
  if (batch.size() == 0) throw StateError("empty batch");
  const Matrix next_in = policy_inputs(agent, batch.next_states,
                                       batch.next_achieved_goals, batch.desired_goals);
  const Matrix next_u = nn::forward_batch(agent.nets.actor_target, next_in);
  const Matrix q = nn::forward_batch(agent.nets.critic_target,
                                     critic_inputs(next_in, next_u));
  return clip_targets(batch.rewards, q.row(0).transpose(), agent.hp.gamma);
}

namespace {

struct CriticPass {
  nn::ForwardCache cache;
  Vector diff;
  double loss = 0.0;
};

CriticPass critic_pass(const Agent& agent, const TransitionBatch& batch,
                       const Vector& targets) {
  if (batch.size() == 0) throw StateError("empty batch");
  if (targets.size() != batch.size()) throw ShapeError("targets/batch size mismatch");
  const Matrix in = critic_inputs(
      policy_inputs(agent, batch.states, batch.achieved_goals, batch.desired_goals),
      batch.actions / agent.hp.max_action);
  CriticPass p;
  p.cache = nn::forward_cached(agent.nets.critic, in);
  p.diff = p.cache.output().row(0).transpose() - targets;
  p.loss = p.diff.squaredNorm() / static_cast<double>(batch.size());
  return p;
}

struct ActorPass {
  nn::ForwardCache actor_cache;
  nn::ForwardCache critic_cache;
  double loss = 0.0;
};

ActorPass actor_pass(const Agent& agent, const nn::NetworkParams& actor,
                     const TransitionBatch& batch) {
  if (batch.size() == 0) throw StateError("empty batch");
  const Matrix in =
      policy_inputs(agent, batch.states, batch.achieved_goals, batch.desired_goals);
  ActorPass p;
  p.actor_cache = nn::forward_cached(actor, in);
  const Matrix& u = p.actor_cache.output();
  p.critic_cache = nn::forward_cached(agent.nets.critic, critic_inputs(in, u));
  const double n = static_cast<double>(batch.size());
  p.loss = -p.critic_cache.output().sum() / n +
           agent.hp.action_l2 * u.squaredNorm() / static_cast<double>(u.size());
  return p;
}

}  // namespace

double critic_loss(const Agent& agent, const TransitionBatch& batch,
                   const Vector& targets) {
  return critic_pass(agent, batch, targets).loss;
}

double critic_update(Agent& agent, const TransitionBatch& batch,
                     const Vector& targets) {
  CriticPass p = critic_pass(agent, batch, targets);
  if (!std::isfinite(p.loss)) throw NumericError("non-finite critic loss");
  const Matrix upstream =
      (2.0 / static_cast<double>(batch.size())) * p.diff.transpose();
  const nn::GradientBundle g = nn::backward_batch(agent.nets.critic, p.cache, upstream);
  nn::adam_step_inplace(agent.nets.critic, g, agent.critic_opt);
  return p.loss;
}

double actor_loss(const Agent& agent, const TransitionBatch& batch) {
  return actor_pass(agent, agent.nets.actor, batch).loss;
}

double actor_update(Agent& agent, const TransitionBatch& batch) {
  ActorPass p = actor_pass(agent, agent.nets.actor, batch);
  if (!std::isfinite(p.loss)) throw NumericError("non-finite actor loss");
  const double n = static_cast<double>(batch.size());
  const Matrix& u = p.actor_cache.output();
  const Matrix q_upstream = Matrix::Constant(1, batch.size(), -1.0 / n);
  const Matrix dq_din = nn::input_gradient(agent.nets.critic, p.critic_cache, q_upstream);
  Matrix du = dq_din.bottomRows(kActionDim);
  du += (2.0 * agent.hp.action_l2 / static_cast<double>(u.size())) * u;
  const nn::GradientBundle g = nn::backward_batch(agent.nets.actor, p.actor_cache, du);
  nn::adam_step_inplace(agent.nets.actor, g, agent.actor_opt);
  return p.loss;
}

void polyak_update_inplace(const nn::NetworkParams& main,
                           nn::NetworkParams& target, double polyak) {
  if (main.layers.size() != target.layers.size()) {
    throw ShapeError("polyak: network depth mismatch");
  }
  for (std::size_t k = 0; k < main.layers.size(); ++k) {
    const auto& m = main.layers[k];
    const auto& t = target.layers[k];
    if (m.weights.rows() != t.weights.rows() || m.weights.cols() != t.weights.cols() ||
        m.bias.size() != t.bias.size()) {
      throw ShapeError("polyak: shape mismatch at layer " + std::to_string(k));
    }
  }
  for (std::size_t k = 0; k < main.layers.size(); ++k) {
    auto& t = target.layers[k];
    const auto& m = main.layers[k];
    t.weights = polyak * t.weights + (1.0 - polyak) * m.weights;
    t.bias = polyak * t.bias + (1.0 - polyak) * m.bias;
  }
}

nn::NetworkParams polyak_update(const nn::NetworkParams& main,
                                const nn::NetworkParams& target, double polyak) {
  nn::NetworkParams out = target;
  polyak_update_inplace(main, out, polyak);
  return out;
}

void update_targets(Agent& agent) {
  polyak_update_inplace(agent.nets.actor, agent.nets.actor_target, agent.hp.polyak);
  polyak_update_inplace(agent.nets.critic, agent.nets.critic_target, agent.hp.polyak);
}

}  // namespace gcrl::ddpg

namespace gcrl::detail {

Json normalizer_to_json(const ddpg::Normalizer& norm) {
  Json j;
  j["sum"] = std::vector<double>(norm.sum.data(), norm.sum.data() + norm.sum.size());
  j["sumsq"] =
      std::vector<double>(norm.sumsq.data(), norm.sumsq.data() + norm.sumsq.size());
  j["count"] = norm.count;
  j["eps"] = norm.eps;
  j["clip"] = norm.clip;
  return j;
}

ddpg::Normalizer normalizer_from_json(const Json& j) {
  const auto sum = j.at("sum").get<std::vector<double>>();
  const auto sumsq = j.at("sumsq").get<std::vector<double>>();
  if (sum.size() != sumsq.size()) throw ShapeError("sum/sumsq length mismatch");
  ddpg::Normalizer n;
  n.sum = Eigen::Map<const Eigen::VectorXd>(sum.data(), static_cast<Eigen::Index>(sum.size()));
  n.sumsq = Eigen::Map<const Eigen::VectorXd>(sumsq.data(),
                                              static_cast<Eigen::Index>(sumsq.size()));
  n.count = j.at("count").get<double>();
  n.eps = j.at("eps").get<double>();
  n.clip = j.at("clip").get<double>();
  return n;
}

Json hyperparams_to_json(const ddpg::Hyperparams& hp) {
  return Json{{"gamma", hp.gamma},
              {"polyak", hp.polyak},
              {"lr_actor", hp.lr_actor},
              {"lr_critic", hp.lr_critic},
              {"action_l2", hp.action_l2},
              {"max_action", hp.max_action},
              {"batch_size", hp.batch_size},
              {"buffer_capacity", hp.buffer_capacity},
              {"rollout_batch", hp.rollout_batch},
              {"noise_std", hp.noise_std},
              {"random_action_prob", hp.random_action_prob},
              {"obs_clip", hp.obs_clip},
              {"norm_eps", hp.norm_eps},
              {"norm_clip", hp.norm_clip},
              {"hidden_layers", hp.hidden_layers},
              {"hidden_units", hp.hidden_units},
              {"k_future", hp.k_future},
              {"use_her", hp.use_her},
              {"include_achieved_goal", hp.include_achieved_goal}};
}

// Missing keys keep their defaults so partial config files are accepted.
ddpg::Hyperparams hyperparams_from_json(const Json& j) {
  ddpg::Hyperparams hp;
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("gamma", hp.gamma);
  get("polyak", hp.polyak);
  get("lr_actor", hp.lr_actor);
  get("lr_critic", hp.lr_critic);
  get("action_l2", hp.action_l2);
  get("max_action", hp.max_action);
  get("batch_size", hp.batch_size);
  get("buffer_capacity", hp.buffer_capacity);
  get("rollout_batch", hp.rollout_batch);
  get("noise_std", hp.noise_std);
  get("random_action_prob", hp.random_action_prob);
  get("obs_clip", hp.obs_clip);
  get("norm_eps", hp.norm_eps);
  get("norm_clip", hp.norm_clip);
  get("hidden_layers", hp.hidden_layers);
  get("hidden_units", hp.hidden_units);
  get("k_future", hp.k_future);
  get("use_her", hp.use_her);
  get("include_achieved_goal", hp.include_achieved_goal);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!hyperparams_to_json(hp).contains(it.key())) {
      throw ConfigError("unknown hyperparameter '" + it.key() + "'");
    }
  }
  return hp;
}

}  // namespace gcrl::detail
