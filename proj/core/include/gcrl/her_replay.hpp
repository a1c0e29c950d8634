#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gcrl/transition.hpp"

namespace gcrl::her {

inline constexpr int kEpisodeLength = 60;
inline constexpr double kSuccessTolerance = 0.05;  // m, planar

// 0 if the planar (x, y) distance is below tolerance, otherwise -1.
double recompute_reward(const Eigen::Vector3d& achieved, const Eigen::Vector3d& goal,
                        double tolerance = kSuccessTolerance);

struct EpisodeRecord {
  std::vector<Transition> transitions;
  std::string env_id;
  std::uint64_t seed = 0;
  std::uint64_t episode_index = 0;
};

// Compact column layout of one episode: T+1 observations, T actions.
struct StoredEpisode {
  Eigen::MatrixXd states;          // state_dim x (T+1)
  Eigen::MatrixXd achieved_goals;  // 3 x (T+1)
  Eigen::MatrixXd desired_goals;   // 3 x T
  Eigen::MatrixXd actions;         // 4 x T
  Eigen::VectorXd rewards;         // T
  std::string env_id;
  std::uint64_t seed = 0;
  std::uint64_t episode_index = 0;

  int length() const { return static_cast<int>(rewards.size()); }
  Transition transition(int t) const;
  bool operator==(const StoredEpisode& other) const;
};

// Checks length, state chaining, and reward consistency. Throws StateError
// describing the first violation.
StoredEpisode pack_episode(const EpisodeRecord& ep, int episode_length = kEpisodeLength);
EpisodeRecord unpack_episode(const StoredEpisode& ep);
void validate_episode(const StoredEpisode& ep, int episode_length);

// Which stored step a sampled transition came from and which future
// achieved goal (index into achieved_goals, -1 if not relabeled) it uses.
struct SampleTrace {
  int episode = 0;
  int step = 0;
  int future = -1;
};

// HER "future" sampling over an arbitrary episode collection. Each sample
// is relabeled with probability 1 - 1/(1 + k_future) using the achieved goal
// of a uniformly chosen index in [t+1, T].
TransitionBatch sample_transitions(std::span<const StoredEpisode* const> episodes,
                                   int batch_size, int k_future, std::mt19937_64& rng,
                                   std::vector<SampleTrace>* trace = nullptr);

class ReplayBuffer {
 public:
  ReplayBuffer(long capacity, int state_dim, int episode_length = kEpisodeLength);

  // Appends an episode, evicting the oldest episodes until the transition
  // count fits the capacity.
  void store(StoredEpisode ep);
  void store_episode(const EpisodeRecord& ep);

  TransitionBatch sample_batch(int batch_size, int k_future, std::mt19937_64& rng,
                               std::vector<SampleTrace>* trace = nullptr) const;

  long capacity() const { return capacity_; }
  int state_dim() const { return state_dim_; }
  int episode_length() const { return episode_length_; }
  long transition_count() const;
  std::size_t episode_count() const { return episodes_.size(); }
  const StoredEpisode& episode(std::size_t i) const { return episodes_[i]; }
  bool empty() const { return episodes_.empty(); }

  // Length-prefixed little-endian binary format; see README for the layout.
  void dump(std::ostream& out) const;
  static ReplayBuffer restore(std::istream& in);

  bool operator==(const ReplayBuffer& other) const;

 private:
  long capacity_;
  int state_dim_;
  int episode_length_;
  std::deque<StoredEpisode> episodes_;
};

inline void store_episode(ReplayBuffer& buf, const EpisodeRecord& ep) {
  buf.store_episode(ep);
}

inline TransitionBatch sample_batch(const ReplayBuffer& buf, int batch_size, int k_future,
                                    std::mt19937_64& rng) {
  return buf.sample_batch(batch_size, k_future, rng);
}

}  // namespace gcrl::her
