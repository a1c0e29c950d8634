#include "gcrl/her_replay.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "gcrl/errors.hpp"
#include "gcrl/neuralcore.hpp"

namespace gcrl::her {

double recompute_reward(const Eigen::Vector3d& achieved, const Eigen::Vector3d& goal,
                        double tolerance) {
  const double d = (achieved.head<2>() - goal.head<2>()).norm();
  return d < tolerance ? 0.0 : -1.0;
}

Transition StoredEpisode::transition(int t) const {
  return Transition{states.col(t),         actions.col(t),
                    desired_goals.col(t),  achieved_goals.col(t),
                    rewards(t),            states.col(t + 1),
                    achieved_goals.col(t + 1)};
}

bool StoredEpisode::operator==(const StoredEpisode& o) const {
  return nn::exactly_equal(states, o.states) &&
         nn::exactly_equal(achieved_goals, o.achieved_goals) &&
         nn::exactly_equal(desired_goals, o.desired_goals) &&
         nn::exactly_equal(actions, o.actions) && nn::exactly_equal(rewards, o.rewards) &&
         env_id == o.env_id && seed == o.seed && episode_index == o.episode_index;
}

void validate_episode(const StoredEpisode& ep, int episode_length) {
  const int T = episode_length;
  if (ep.rewards.size() != T || ep.actions.cols() != T || ep.desired_goals.cols() != T ||
      ep.states.cols() != T + 1 || ep.achieved_goals.cols() != T + 1) {
    throw StateError("malformed episode: expected " + std::to_string(T) + " transitions");
  }
  if (ep.actions.rows() != kActionDim || ep.desired_goals.rows() != kGoalDim ||
      ep.achieved_goals.rows() != kGoalDim) {
    throw StateError("malformed episode: wrong action or goal dimension");
  }
  for (int t = 0; t < T; ++t) {
    const double r = recompute_reward(ep.achieved_goals.col(t + 1), ep.desired_goals.col(t));
    if (ep.rewards(t) != r) {
      throw StateError("malformed episode: reward at step " + std::to_string(t) +
                       " disagrees with achieved/desired goals");
    }
  }
}

StoredEpisode pack_episode(const EpisodeRecord& ep, int episode_length) {
  const int T = episode_length;
  if (static_cast<int>(ep.transitions.size()) != T) {
    throw StateError("malformed episode: " + std::to_string(ep.transitions.size()) +
                     " transitions, expected " + std::to_string(T));
  }
  const auto S = ep.transitions.front().state.size();
  StoredEpisode out;
  out.states.resize(S, T + 1);
  out.achieved_goals.resize(kGoalDim, T + 1);
  out.desired_goals.resize(kGoalDim, T);
  out.actions.resize(kActionDim, T);
  out.rewards.resize(T);
  for (int t = 0; t < T; ++t) {
    const Transition& tr = ep.transitions[static_cast<std::size_t>(t)];
    if (tr.state.size() != S || tr.next_state.size() != S) {
      throw StateError("malformed episode: inconsistent state dimension at step " +
                       std::to_string(t));
    }
    if (t > 0) {
      const Transition& prev = ep.transitions[static_cast<std::size_t>(t - 1)];
      if (prev.next_state != tr.state || prev.next_achieved_goal != tr.achieved_goal) {
        throw StateError("malformed episode: broken state chaining at step " +
                         std::to_string(t));
      }
    }
    out.states.col(t) = tr.state;
    out.achieved_goals.col(t) = tr.achieved_goal;
    out.desired_goals.col(t) = tr.desired_goal;
    out.actions.col(t) = tr.action;
    out.rewards(t) = tr.reward;
  }
  out.states.col(T) = ep.transitions.back().next_state;
  out.achieved_goals.col(T) = ep.transitions.back().next_achieved_goal;
  out.env_id = ep.env_id;
  out.seed = ep.seed;
  out.episode_index = ep.episode_index;
  validate_episode(out, T);
  return out;
}

EpisodeRecord unpack_episode(const StoredEpisode& ep) {
  EpisodeRecord r;
  r.env_id = ep.env_id;
  r.seed = ep.seed;
  r.episode_index = ep.episode_index;
  r.transitions.reserve(static_cast<std::size_t>(ep.length()));
  for (int t = 0; t < ep.length(); ++t) r.transitions.push_back(ep.transition(t));
  return r;
}

TransitionBatch sample_transitions(std::span<const StoredEpisode* const> episodes,
                                   int batch_size, int k_future, std::mt19937_64& rng,
                                   std::vector<SampleTrace>* trace) {
  if (episodes.empty()) throw StateError("cannot sample from an empty buffer");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (k_future < 0) throw ConfigError("k_future must be >= 0");
  const double relabel_p = 1.0 - 1.0 / (1.0 + static_cast<double>(k_future));
  const auto S = episodes.front()->states.rows();
  TransitionBatch batch = TransitionBatch::allocate(S, batch_size);
  if (trace) trace->assign(static_cast<std::size_t>(batch_size), SampleTrace{});

  std::uniform_int_distribution<std::size_t> pick_episode(0, episodes.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < batch_size; ++i) {
    const std::size_t e = pick_episode(rng);
    const StoredEpisode& ep = *episodes[e];
    const int T = ep.length();
    std::uniform_int_distribution<int> pick_step(0, T - 1);
    const int t = pick_step(rng);
    const bool relabel = unit(rng) < relabel_p;

    batch.states.col(i) = ep.states.col(t);
    batch.actions.col(i) = ep.actions.col(t);
    batch.achieved_goals.col(i) = ep.achieved_goals.col(t);
    batch.next_states.col(i) = ep.states.col(t + 1);
    batch.next_achieved_goals.col(i) = ep.achieved_goals.col(t + 1);
    int future = -1;
    if (relabel) {
      std::uniform_int_distribution<int> pick_future(t + 1, T);
      future = pick_future(rng);
      batch.desired_goals.col(i) = ep.achieved_goals.col(future);
      batch.rewards(i) = recompute_reward(ep.achieved_goals.col(t + 1),
                                          ep.achieved_goals.col(future));
    } else {
      batch.desired_goals.col(i) = ep.desired_goals.col(t);
      batch.rewards(i) = ep.rewards(t);
    }
    if (trace) (*trace)[static_cast<std::size_t>(i)] = {static_cast<int>(e), t, future};
  }
  return batch;
}

ReplayBuffer::ReplayBuffer(long capacity, int state_dim, int episode_length)
    : capacity_(capacity), state_dim_(state_dim), episode_length_(episode_length) {
  if (episode_length < 1) throw ConfigError("episode length must be >= 1");
  if (capacity < episode_length) {
    throw ConfigError("buffer capacity " + std::to_string(capacity) +
                      " cannot hold a single episode of " + std::to_string(episode_length));
  }
  if (state_dim < 1) throw ConfigError("state_dim must be >= 1");
}

long ReplayBuffer::transition_count() const {
  return static_cast<long>(episodes_.size()) * episode_length_;
}

void ReplayBuffer::store(StoredEpisode ep) {
  if (ep.states.rows() != state_dim_) {
    throw StateError("malformed episode: state dimension " +
                     std::to_string(ep.states.rows()) + ", buffer expects " +
                     std::to_string(state_dim_));
  }
  validate_episode(ep, episode_length_);
  while (transition_count() + episode_length_ > capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(ep));
}

void ReplayBuffer::store_episode(const EpisodeRecord& ep) {
  store(pack_episode(ep, episode_length_));
}

TransitionBatch ReplayBuffer::sample_batch(int batch_size, int k_future,
                                           std::mt19937_64& rng,
                                           std::vector<SampleTrace>* trace) const {
  std::vector<const StoredEpisode*> view;
  view.reserve(episodes_.size());
  for (const auto& ep : episodes_) view.push_back(&ep);
  return sample_transitions(view, batch_size, k_future, rng, trace);
}

bool ReplayBuffer::operator==(const ReplayBuffer& o) const {
  return capacity_ == o.capacity_ && state_dim_ == o.state_dim_ &&
         episode_length_ == o.episode_length_ && episodes_ == o.episodes_;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "replay dump assumes a little-endian host");

constexpr std::array<char, 8> kMagic{'G', 'C', 'R', 'L', 'R', 'B', '\0', '\1'};
constexpr std::uint32_t kDumpVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_doubles(std::ostream& out, const Eigen::MatrixXd& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ParseError("replay", std::string("truncated while reading ") + what);
  }
  return v;
}

void get_doubles(std::istream& in, Eigen::MatrixXd& m, const char* what) {
  if (!in.read(reinterpret_cast<char*>(m.data()),
               static_cast<std::streamsize>(m.size() * sizeof(double)))) {
    throw ParseError("replay", std::string("truncated while reading ") + what);
  }
}

}  // namespace

void ReplayBuffer::dump(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kDumpVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(state_dim_));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(episode_length_));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(capacity_));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(episodes_.size()));
  const std::uint64_t T = static_cast<std::uint64_t>(episode_length_);
  const std::uint64_t S = static_cast<std::uint64_t>(state_dim_);
  for (const auto& ep : episodes_) {
    const std::uint64_t doubles = (T + 1) * S + (T + 1) * 3 + T * 3 + T * 4 + T;
    const std::uint64_t length = 4 + ep.env_id.size() + 8 + 8 + doubles * 8;
    put<std::uint64_t>(out, length);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ep.env_id.size()));
    out.write(ep.env_id.data(), static_cast<std::streamsize>(ep.env_id.size()));
    put<std::uint64_t>(out, ep.seed);
    put<std::uint64_t>(out, ep.episode_index);
    put_doubles(out, ep.states);
    put_doubles(out, ep.achieved_goals);
    put_doubles(out, ep.desired_goals);
    put_doubles(out, ep.actions);
    put_doubles(out, ep.rewards);
  }
  if (!out) throw Error("replay dump: write failed");
}

ReplayBuffer ReplayBuffer::restore(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ParseError("replay", "bad magic");
  }
  if (get<std::uint32_t>(in, "version") != kDumpVersion) {
    throw ParseError("replay", "unsupported version");
  }
  const auto S = static_cast<int>(get<std::uint32_t>(in, "state_dim"));
  const auto T = static_cast<int>(get<std::uint32_t>(in, "episode_length"));
  const auto capacity = static_cast<long>(get<std::uint64_t>(in, "capacity"));
  const auto count = get<std::uint64_t>(in, "episode_count");
  ReplayBuffer buf(capacity, S, T);
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto length = get<std::uint64_t>(in, "record length");
    const auto id_len = get<std::uint32_t>(in, "env id length");
    const std::uint64_t doubles = static_cast<std::uint64_t>((T + 1) * S + (T + 1) * 3 +
                                                             T * 3 + T * 4 + T);
    if (length != 4 + id_len + 16 + doubles * 8) {
      throw ParseError("replay", "record " + std::to_string(e) + " has inconsistent length");
    }
    StoredEpisode ep;
    ep.env_id.resize(id_len);
    if (!in.read(ep.env_id.data(), id_len)) throw ParseError("replay", "truncated env id");
    ep.seed = get<std::uint64_t>(in, "seed");
    ep.episode_index = get<std::uint64_t>(in, "episode index");
    ep.states.resize(S, T + 1);
    ep.achieved_goals.resize(kGoalDim, T + 1);
    ep.desired_goals.resize(kGoalDim, T);
    ep.actions.resize(kActionDim, T);
    Eigen::MatrixXd rewards(T, 1);
    get_doubles(in, ep.states, "states");
    get_doubles(in, ep.achieved_goals, "achieved goals");
    get_doubles(in, ep.desired_goals, "desired goals");
    get_doubles(in, ep.actions, "actions");
    get_doubles(in, rewards, "rewards");
    ep.rewards = rewards.col(0);
    try {
      buf.store(std::move(ep));
    } catch (const StateError& err) {
      throw ParseError("replay", err.what());
    }
  }
  return buf;
}

}  // namespace gcrl::her
