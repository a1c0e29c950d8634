#include <doctest.h>

#include <sstream>

#include "gcrl/episode_log.hpp"
#include "gcrl/errors.hpp"

using namespace gcrl;
using namespace gcrl::analysis;

namespace {

EpisodeLog sample_log() {
  EpisodeLog log;
  log.variant = "ditch";
  log.seed = 0xdeadbeefcafef00dULL;
  log.episode_index = 3;
  log.target = Eigen::Vector3d(0.41, -0.07, 0.025);
  log.box_start = Eigen::Vector3d(0.1 + 1e-17, 0.0, 0.025);
  for (int t = 0; t < 60; ++t) {
    StepRecord s;
    s.step = t;
    s.gripper_pos = Eigen::Vector3d(0.01 * t, 0.1 / 3.0, 0.05);
    s.finger_gap = 0.05;
    s.box_pos = Eigen::Vector3d(0.1 + 0.001 * t, 0.0, 0.025);
    s.box_vel = Eigen::Vector3d(0.1 / 0.046, -0.0, 1e-300);
    s.action = Eigen::Vector4d(0.3, -1.0, 1.0, 0.0);
    s.reward = t >= 40 ? 0.0 : -1.0;
    s.gripper_box_contact = t % 7 == 0;
    s.grasped = t == 14;
    log.steps.push_back(s);
  }
  return log;
}

}  // namespace

TEST_CASE("JSON lines round-trip exactly") {
  const auto log = sample_log();
  std::stringstream io;
  write_log(io, log);
  write_log(io, log);
  const auto back = read_logs(io);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == log);
  CHECK(back[1] == log);
  CHECK(to_jsonl(back[0]) == to_jsonl(log));
}

TEST_CASE("cumulative reward and first success") {
  const auto log = sample_log();
  CHECK(log.cumulative_reward() == -40.0);
  CHECK(log.first_success_step() == 40);
}

TEST_CASE("malformed logs name the failing line") {
  const std::string text = to_jsonl(sample_log());
  const auto fails_at = [](const std::string& s, const std::string& needle) {
    std::istringstream in(s);
    try {
      read_logs(in);
    } catch (const ParseError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  // Truncated final episode.
  const std::string two = text + text;
  CHECK(fails_at(two.substr(0, two.rfind('\n', two.size() - 2) + 1), "log"));
  // Garbage on line 5.
  std::string broken = text;
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) pos = broken.find('\n', pos) + 1;
  broken.insert(pos, "{oops\n");
  CHECK(fails_at(broken, "line 5"));
  // Step before any header.
  CHECK(fails_at(text.substr(text.find('\n') + 1), "line 1"));
  // Reward outside {0, -1}.
  std::string bad_reward = text;
  bad_reward.replace(bad_reward.find("\"reward\":-1.0"), 13, "\"reward\":-0.5");
  CHECK(fails_at(bad_reward, "log"));
}

TEST_CASE("validate_log checks step numbering") {
  auto log = sample_log();
  CHECK_NOTHROW(validate_log(log));
  log.steps[10].step = 11;
  CHECK_THROWS_AS(validate_log(log), ParseError);
  log = sample_log();
  log.steps.pop_back();
  CHECK_THROWS_AS(validate_log(log), ParseError);
  CHECK_NOTHROW(validate_log(log, 59));
}
