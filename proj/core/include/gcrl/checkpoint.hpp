#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gcrl/ddpg.hpp"
#include "gcrl/simenv.hpp"

namespace gcrl::train {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ddpg::Agent agent;
  sim::EnvConfig env;
  std::string rng_state;  // textual mt19937_64 state of the learner stream
  std::uint64_t config_hash = 0;
  long long env_steps = 0;
  int epoch = 0;

  bool operator==(const Checkpoint& other) const;
};

struct LoadedCheckpoint {
  Checkpoint checkpoint;
  std::vector<std::string> warnings;
};

std::string save_checkpoint(const Checkpoint& ckpt);
// Writes to a temporary file and renames it over `path`.
void save_checkpoint_file(const Checkpoint& ckpt, const std::string& path);

// Throws ParseError naming the failing section ("json", "header",
// "hyperparams", "env", "networks.actor", ..., "rng"). A config hash that
// differs from `expected_hash` produces a warning, not an error.
LoadedCheckpoint load_checkpoint(std::string_view text,
                                 std::optional<std::uint64_t> expected_hash = std::nullopt);
LoadedCheckpoint load_checkpoint_file(const std::string& path,
                                      std::optional<std::uint64_t> expected_hash = std::nullopt);

}  // namespace gcrl::train
