#include "gcrl/episode_log.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "gcrl/errors.hpp"

namespace gcrl::analysis {

namespace {

using Json = nlohmann::json;

template <int N>
Json vec(const Eigen::Matrix<double, N, 1>& v) {
  return std::vector<double>(v.data(), v.data() + N);
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  if (values.size() != static_cast<std::size_t>(N)) {
    throw ParseError("log", "expected " + std::to_string(N) + " numbers");
  }
  return Eigen::Map<const Eigen::Matrix<double, N, 1>>(values.data());
}

}  // namespace

double EpisodeLog::cumulative_reward() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.reward;
  return total;
}

int EpisodeLog::first_success_step() const {
  for (const auto& s : steps) {
    if (s.reward == 0.0) return s.step;
  }
  return -1;
}

void validate_log(const EpisodeLog& log, int episode_len) {
  if (static_cast<int>(log.steps.size()) != episode_len) {
    throw ParseError("log", "episode " + std::to_string(log.episode_index) + " has " +
                                std::to_string(log.steps.size()) + " steps, expected " +
                                std::to_string(episode_len));
  }
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& s = log.steps[i];
    if (s.step != static_cast<int>(i)) {
      throw ParseError("log", "step records out of order at index " + std::to_string(i));
    }
    if (s.reward != 0.0 && s.reward != -1.0) {
      throw ParseError("log", "reward must be 0 or -1 at step " + std::to_string(i));
    }
  }
}

void write_log(std::ostream& out, const EpisodeLog& log) {
  Json header{{"type", "episode"},
              {"variant", log.variant},
              {"seed", log.seed},
              {"episode_index", log.episode_index},
              {"target", vec<3>(log.target)},
              {"box_start", vec<3>(log.box_start)}};
  out << header.dump() << '\n';
  for (const auto& s : log.steps) {
    Json line{{"type", "step"},
              {"step", s.step},
              {"gripper_pos", vec<3>(s.gripper_pos)},
              {"finger_gap", s.finger_gap},
              {"box_pos", vec<3>(s.box_pos)},
              {"box_vel", vec<3>(s.box_vel)},
              {"action", vec<4>(s.action)},
              {"reward", s.reward},
              {"contact", s.gripper_box_contact},
              {"grasped", s.grasped}};
    out << line.dump() << '\n';
  }
}

std::string to_jsonl(const EpisodeLog& log) {
  std::ostringstream os;
  write_log(os, log);
  return os.str();
}

std::vector<EpisodeLog> read_logs(std::istream& in, int episode_len) {
  std::vector<EpisodeLog> logs;
  std::string line;
  long line_no = 0;
  bool open = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      const Json j = Json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "episode") {
        if (open) validate_log(logs.back(), episode_len);
        EpisodeLog log;
        log.variant = j.at("variant").get<std::string>();
        log.seed = j.at("seed").get<std::uint64_t>();
        log.episode_index = j.at("episode_index").get<std::uint64_t>();
        log.target = vec_from<3>(j.at("target"));
        if (j.contains("box_start")) log.box_start = vec_from<3>(j.at("box_start"));
        logs.push_back(std::move(log));
        open = true;
      } else if (type == "step") {
        if (!open) throw ParseError("log", "step record before episode header");
        StepRecord s;
        s.step = j.at("step").get<int>();
        s.gripper_pos = vec_from<3>(j.at("gripper_pos"));
        s.finger_gap = j.at("finger_gap").get<double>();
        s.box_pos = vec_from<3>(j.at("box_pos"));
        s.box_vel = vec_from<3>(j.at("box_vel"));
        s.action = vec_from<4>(j.at("action"));
        s.reward = j.at("reward").get<double>();
        s.gripper_box_contact = j.at("contact").get<bool>();
        s.grasped = j.at("grasped").get<bool>();
        logs.back().steps.push_back(s);
      } else {
        throw ParseError("log", "unknown record type '" + type + "'");
      }
    } catch (const ParseError& e) {
      throw ParseError("log", "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Json::exception& e) {
      throw ParseError("log", "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (open) validate_log(logs.back(), episode_len);
  return logs;
}

std::vector<EpisodeLog> read_log_file(const std::string& path, int episode_len) {
  std::ifstream in(path);
  if (!in) throw ParseError("log", "cannot open '" + path + "'");
  return read_logs(in, episode_len);
}

}  // namespace gcrl::analysis
