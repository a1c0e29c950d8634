#include "gcrl/checkpoint.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gcrl/errors.hpp"
#include "json_io.hpp"

namespace gcrl::train {

using detail::Json;
using detail::parse_section;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.empty() || s.size() > 16) throw ParseError("header", "bad config hash '" + s + "'");
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ParseError("header", "bad config hash '" + s + "'");
  }
  return v;
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& other) const {
  return agent == other.agent && sim::to_json(env) == sim::to_json(other.env) &&
         rng_state == other.rng_state && config_hash == other.config_hash &&
         env_steps == other.env_steps && epoch == other.epoch;
}

std::string save_checkpoint(const Checkpoint& ckpt) {
  const ddpg::Agent& a = ckpt.agent;
  Json j;
  j["version"] = kCheckpointVersion;
  j["config_hash"] = hex64(ckpt.config_hash);
  j["env_steps"] = ckpt.env_steps;
  j["epoch"] = ckpt.epoch;
  j["state_dim"] = a.state_dim;
  j["hyperparams"] = detail::hyperparams_to_json(a.hp);
  j["env"] = Json::parse(sim::to_json(ckpt.env));
  j["networks"] = {{"actor", detail::network_to_json(a.nets.actor)},
                   {"critic", detail::network_to_json(a.nets.critic)},
                   {"actor_target", detail::network_to_json(a.nets.actor_target)},
                   {"critic_target", detail::network_to_json(a.nets.critic_target)}};
  j["optimizers"] = {{"actor", detail::adam_to_json(a.actor_opt)},
                     {"critic", detail::adam_to_json(a.critic_opt)}};
  j["normalizers"] = {{"obs", detail::normalizer_to_json(a.obs_norm)},
                      {"goal", detail::normalizer_to_json(a.goal_norm)}};
  j["rng"] = ckpt.rng_state;
  return j.dump(1) + "\n";
}

void save_checkpoint_file(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + tmp + "'");
    out << save_checkpoint(ckpt);
    out.flush();
    if (!out) throw Error("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(std::string_view text,
                                 std::optional<std::uint64_t> expected_hash) {
  const Json j = parse_section("json", [&] { return Json::parse(text); });
  LoadedCheckpoint out;
  Checkpoint& c = out.checkpoint;
  ddpg::Agent& a = c.agent;

  parse_section("header", [&] {
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ParseError("header", "unsupported checkpoint version " + std::to_string(version));
    }
    c.config_hash = parse_hex64(j.at("config_hash").get<std::string>());
    c.env_steps = j.at("env_steps").get<long long>();
    c.epoch = j.at("epoch").get<int>();
    a.state_dim = j.at("state_dim").get<int>();
  });
  a.hp = parse_section("hyperparams", [&] {
    auto hp = detail::hyperparams_from_json(j.at("hyperparams"));
    hp.validate();
    return hp;
  });
  c.env = parse_section("env", [&] { return sim::load_env_config(j.at("env").dump()); });

  const auto net = [&](const char* name, int in, int out_dim) {
    return parse_section(std::string("networks.") + name, [&] {
      auto n = detail::network_from_json(j.at("networks").at(name));
      if (n.input_size() != in || n.output_size() != out_dim) {
        throw ShapeError("network shape does not match state_dim and hyperparams");
      }
      return n;
    });
  };
  a.nets.actor = net("actor", a.actor_input_dim(), kActionDim);
  a.nets.critic = net("critic", a.critic_input_dim(), 1);
  a.nets.actor_target = net("actor_target", a.actor_input_dim(), kActionDim);
  a.nets.critic_target = net("critic_target", a.critic_input_dim(), 1);

  const auto opt = [&](const char* name, const nn::NetworkParams& params) {
    return parse_section(std::string("optimizers.") + name, [&] {
      auto s = detail::adam_from_json(j.at("optimizers").at(name));
      if (s.first_moment_w.size() != params.layers.size()) throw ShapeError("optimizer layer count");
      for (std::size_t i = 0; i < s.first_moment_w.size(); ++i) {
        if (s.first_moment_w[i].rows() != params.layers[i].weights.rows() ||
            s.first_moment_w[i].cols() != params.layers[i].weights.cols()) {
          throw ShapeError("optimizer moment shape");
        }
      }
      return s;
    });
  };
  a.actor_opt = opt("actor", a.nets.actor);
  a.critic_opt = opt("critic", a.nets.critic);

  const auto norm = [&](const char* name, int dim) {
    return parse_section(std::string("normalizers.") + name, [&] {
      auto n = detail::normalizer_from_json(j.at("normalizers").at(name));
      if (n.dim() != dim) throw ShapeError("normalizer dimension");
      return n;
    });
  };
  a.obs_norm = norm("obs", a.feature_dim());
  a.goal_norm = norm("goal", kGoalDim);

  c.rng_state = parse_section("rng", [&] {
    auto s = j.at("rng").get<std::string>();
    detail::rng_from_state(s);
    return s;
  });

  if (expected_hash && *expected_hash != c.config_hash) {
    out.warnings.push_back("checkpoint config hash " + hex64(c.config_hash) +
                           " differs from the current config " + hex64(*expected_hash));
  }
  return out;
}

LoadedCheckpoint load_checkpoint_file(const std::string& path,
                                      std::optional<std::uint64_t> expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("file", "cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return load_checkpoint(text.str(), expected_hash);
}

}  // namespace gcrl::train
