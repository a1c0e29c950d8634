#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gcrl::analysis {

// State after one control step, as recorded during evaluation.
struct StepRecord {
  int step = 0;
  Eigen::Vector3d gripper_pos = Eigen::Vector3d::Zero();
  double finger_gap = 0.0;
  Eigen::Vector3d box_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d box_vel = Eigen::Vector3d::Zero();
  Eigen::Vector4d action = Eigen::Vector4d::Zero();
  double reward = -1.0;
  bool gripper_box_contact = false;
  bool grasped = false;

  bool operator==(const StepRecord&) const = default;
};

struct EpisodeLog {
  std::string variant;
  std::uint64_t seed = 0;
  std::uint64_t episode_index = 0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  Eigen::Vector3d box_start = Eigen::Vector3d::Zero();
  std::vector<StepRecord> steps;

  double cumulative_reward() const;
  // First step whose reward is 0, or -1.
  int first_success_step() const;
  bool operator==(const EpisodeLog&) const = default;
};

// Throws ParseError("log") unless the log has `episode_len` steps numbered
// 0..episode_len-1 and every reward is 0 or -1.
void validate_log(const EpisodeLog& log, int episode_len = 60);

// One header line followed by one line per step.
void write_log(std::ostream& out, const EpisodeLog& log);
std::string to_jsonl(const EpisodeLog& log);

// Reads every episode in a JSON-lines stream. Throws ParseError naming the
// line on malformed input.
std::vector<EpisodeLog> read_logs(std::istream& in, int episode_len = 60);
std::vector<EpisodeLog> read_log_file(const std::string& path, int episode_len = 60);

}  // namespace gcrl::analysis
