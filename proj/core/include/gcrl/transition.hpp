#pragma once

#include <Eigen/Dense>

namespace gcrl {

inline constexpr int kGoalDim = 3;
inline constexpr int kActionDim = 4;

struct Transition {
  Eigen::VectorXd state;
  Eigen::Vector4d action = Eigen::Vector4d::Zero();
  Eigen::Vector3d desired_goal = Eigen::Vector3d::Zero();
  Eigen::Vector3d achieved_goal = Eigen::Vector3d::Zero();
  double reward = -1.0;
  Eigen::VectorXd next_state;
  Eigen::Vector3d next_achieved_goal = Eigen::Vector3d::Zero();
};

// Column-per-sample view of a minibatch, the layout the networks consume.
struct TransitionBatch {
  Eigen::MatrixXd states;          // state_dim x B
  Eigen::MatrixXd actions;         // 4 x B
  Eigen::MatrixXd desired_goals;   // 3 x B
  Eigen::MatrixXd achieved_goals;  // 3 x B
  Eigen::VectorXd rewards;         // B
  Eigen::MatrixXd next_states;     // state_dim x B
  Eigen::MatrixXd next_achieved_goals;  // 3 x B

  Eigen::Index size() const { return rewards.size(); }

  Transition at(Eigen::Index i) const {
    return Transition{states.col(i),         actions.col(i),
                      desired_goals.col(i),  achieved_goals.col(i),
                      rewards(i),            next_states.col(i),
                      next_achieved_goals.col(i)};
  }

  static TransitionBatch allocate(Eigen::Index state_dim, Eigen::Index n) {
    TransitionBatch b;
    b.states.resize(state_dim, n);
    b.actions.resize(kActionDim, n);
    b.desired_goals.resize(kGoalDim, n);
    b.achieved_goals.resize(kGoalDim, n);
    b.rewards.resize(n);
    b.next_states.resize(state_dim, n);
    b.next_achieved_goals.resize(kGoalDim, n);
    return b;
  }

  void set(Eigen::Index i, const Transition& t) {
    states.col(i) = t.state;
    actions.col(i) = t.action;
    desired_goals.col(i) = t.desired_goal;
    achieved_goals.col(i) = t.achieved_goal;
    rewards(i) = t.reward;
    next_states.col(i) = t.next_state;
    next_achieved_goals.col(i) = t.next_achieved_goal;
  }
};

}  // namespace gcrl
