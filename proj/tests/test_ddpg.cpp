#include <doctest.h>

#include <random>

#include "gcrl/ddpg.hpp"
#include "gcrl/errors.hpp"
#include "support/oracles.hpp"

using namespace gcrl;
using namespace gcrl::ddpg;

namespace {

constexpr int kState = 10;

TransitionBatch random_batch(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto b = TransitionBatch::allocate(kState, n);
  for (auto* m : {&b.states, &b.actions, &b.desired_goals, &b.achieved_goals, &b.next_states,
                  &b.next_achieved_goals}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = u(rng);
  }
  for (int i = 0; i < n; ++i) b.rewards(i) = (i % 4 == 0) ? 0.0 : -1.0;
  return b;
}

Hyperparams small_hp() {
  Hyperparams hp;
  hp.hidden_layers = 2;
  hp.hidden_units = 16;
  hp.batch_size = 32;
  return hp;
}

}  // namespace

TEST_CASE("exploratory actions stay inside the action box") {
  std::mt19937_64 rng(3);
  for (double max_action : {0.5, 1.0, 3.0}) {
    for (double noise : {0.0, 0.2, 5.0}) {
      for (double eps : {0.0, 0.3, 1.0}) {
        Hyperparams hp = small_hp();
        hp.max_action = max_action;
        hp.noise_std = noise;
        hp.random_action_prob = eps;
        const auto agent = make_agent(kState, hp, 1);
        for (int i = 0; i < 200; ++i) {
          const Vector s = Vector::Random(kState) * 10.0;
          const Vector g = Vector::Random(3) * 10.0;
          const Vector a = select_action(agent.nets, s, g, hp, rng, true);
          REQUIRE(a.size() == 4);
          REQUIRE(a.cwiseAbs().maxCoeff() <= max_action);
        }
      }
    }
  }
}

TEST_CASE("greedy action ignores the RNG") {
  const auto hp = small_hp();
  const auto agent = make_agent(kState, hp, 2);
  std::mt19937_64 r1(1), r2(999);
  const Vector s = Vector::Random(kState), g = Vector::Random(3);
  CHECK(select_action(agent.nets, s, g, hp, r1, false) ==
        select_action(agent.nets, s, g, hp, r2, false));
}

TEST_CASE("actor output scales exactly with max_action") {
  auto hp = small_hp();
  const auto agent = make_agent(kState, hp, 4);
  const Vector s = Vector::Random(kState), g = Vector::Random(3);
  hp.max_action = 1.0;
  const Vector base = actor_forward(agent.nets, s, g, hp);
  for (double c : {0.25, 2.0, 8.0}) {
    hp.max_action = c;
    CHECK(actor_forward(agent.nets, s, g, hp) == base * c);
  }
}

TEST_CASE("target values are clipped to the sparse-reward range") {
  std::mt19937_64 rng(5);
  auto hp = small_hp();
  auto agent = make_agent(kState, hp, 6);
  const auto batch = random_batch(64, rng);
  const double lo = -1.0 / (1.0 - hp.gamma);
  for (double bias : {-1e3, 0.0, 1e3}) {
    agent.nets.critic_target.layers.back().bias(0) = bias;
    const Vector y = compute_target_q(agent, batch);
    CHECK(y.minCoeff() >= lo);
    CHECK(y.maxCoeff() <= 0.0);
  }
  const Vector y = clip_targets(Vector::Constant(3, -1.0), Vector(Eigen::Vector3d(-100, -10, 5)),
                                hp.gamma);
  CHECK(y(0) == lo);
  CHECK(y(1) == doctest::Approx(-1.0 - hp.gamma * 10.0));
  CHECK(y(2) == 0.0);
}

TEST_CASE("polyak update keeps targets between old target and main") {
  using nn::Activation;
  const auto main = nn::init_network({6, 8, 2}, {Activation::ReLU, Activation::Tanh}, 1);
  const auto target = nn::init_network({6, 8, 2}, {Activation::ReLU, Activation::Tanh}, 2);
  for (double p : {0.0, 0.5, 0.95, 1.0}) {
    const auto next = polyak_update(main, target, p);
    for (std::size_t k = 0; k < main.layers.size(); ++k) {
      const auto& w = next.layers[k].weights;
      const auto& wm = main.layers[k].weights;
      const auto& wt = target.layers[k].weights;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double lo = std::min(wm.data()[i], wt.data()[i]);
        const double hi = std::max(wm.data()[i], wt.data()[i]);
        REQUIRE(w.data()[i] >= lo);
        REQUIRE(w.data()[i] <= hi);
        REQUIRE(w.data()[i] == doctest::Approx(p * wt.data()[i] + (1 - p) * wm.data()[i]));
      }
    }
    auto inplace = target;
    polyak_update_inplace(main, inplace, p);
    CHECK(inplace == next);
  }
  CHECK(polyak_update(main, target, 1.0) == target);
}

TEST_CASE("normalizer statistics do not depend on the batch partition") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(1.5, 2.0);
  const Matrix data = Matrix::NullaryExpr(5, 997, [&] { return n(rng); });
  Vector mean, std;
  oracle::batch_moments(data, mean, std);

  std::uniform_int_distribution<int> chunk(1, 200);
  for (int trial = 0; trial < 5; ++trial) {
    auto norm = Normalizer::make(5, 0.01, 5.0);
    for (Eigen::Index c = 0; c < data.cols();) {
      const Eigen::Index len = std::min<Eigen::Index>(chunk(rng), data.cols() - c);
      normalizer_update_inplace(norm, data.middleCols(c, len));
      c += len;
    }
    for (int i = 0; i < 5; ++i) {
      CHECK(norm.mean()(i) == doctest::Approx(mean(i)).epsilon(1e-9));
      CHECK(norm.stddev()(i) == doctest::Approx(std(i)).epsilon(1e-9));
    }
  }
}

TEST_CASE("normalize clips and floors the standard deviation") {
  auto norm = Normalizer::make(2, 0.01, 5.0);
  Matrix data(2, 2);
  data << 1.0, 1.0, 0.0, 2.0;
  norm = normalizer_update(norm, data);
  CHECK(norm.stddev()(0) == 0.01);
  const Vector z = normalize(norm, Vector(Eigen::Vector2d(2.0, 1.5)));
  CHECK(z(0) == 5.0);
  CHECK(z(1) == doctest::Approx(0.5));
}

TEST_CASE("critic loss decreases while fitting fixed targets") {
  std::mt19937_64 rng(11);
  auto agent = make_agent(kState, small_hp(), 12);
  const auto batch = random_batch(32, rng);
  std::uniform_real_distribution<double> u(-10.0, 0.0);
  const Vector y = Vector::NullaryExpr(32, [&] { return u(rng); });
  const double first = critic_loss(agent, batch, y);
  for (int i = 0; i < 100; ++i) critic_update(agent, batch, y);
  CHECK(critic_loss(agent, batch, y) < 0.5 * first);
}

TEST_CASE("actor loss decreases against a fixed linear critic") {
  std::mt19937_64 rng(13);
  auto hp = small_hp();
  hp.action_l2 = 0.1;
  auto agent = make_agent(kState, hp, 14);
  // Q linear in the action is concave, so the regularized actor objective
  // has a unique interior optimum per input.
  agent.nets.critic = nn::init_network({agent.critic_input_dim(), 1}, {nn::Activation::Identity}, 15);
  const auto batch = random_batch(32, rng);
  const double first = actor_loss(agent, batch);
  for (int i = 0; i < 100; ++i) actor_update(agent, batch);
  CHECK(actor_loss(agent, batch) < first - 1e-3);
}

TEST_CASE("updates are deterministic for a fixed seed") {
  const auto run = [] {
    std::mt19937_64 rng(21);
    auto agent = make_agent(kState, small_hp(), 22);
    for (int i = 0; i < 5; ++i) {
      const auto batch = random_batch(32, rng);
      critic_update(agent, batch, compute_target_q(agent, batch));
      actor_update(agent, batch);
      update_targets(agent);
    }
    return agent;
  };
  CHECK(run() == run());
}

TEST_CASE("hyperparameter validation") {
  Hyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.gamma = 1.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.polyak = 1.5;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.batch_size = 0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.random_action_prob = -0.1;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
}

TEST_CASE("optional achieved-goal input widens both networks") {
  auto hp = small_hp();
  hp.include_achieved_goal = true;
  const auto agent = make_agent(kState, hp, 1);
  CHECK(agent.nets.actor.input_size() == kState + 6);
  CHECK(agent.nets.critic.input_size() == kState + 10);
  std::mt19937_64 rng(2);
  const auto batch = random_batch(8, rng);
  CHECK(compute_target_q(agent, batch).size() == 8);
}
