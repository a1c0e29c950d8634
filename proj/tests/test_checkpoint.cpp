#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "gcrl/checkpoint.hpp"
#include "gcrl/errors.hpp"
#include "gcrl/trainer.hpp"

using namespace gcrl;
using namespace gcrl::train;

namespace {

TrainConfig tiny_config(std::uint64_t seed = 5) {
  TrainConfig cfg;
  cfg.env = sim::EnvConfig::for_variant(sim::Variant::Wall);
  cfg.epochs = 1;
  cfg.cycles_per_epoch = 2;
  cfg.episodes_per_cycle = 2;
  cfg.optimizer_steps_per_cycle = 4;
  cfg.eval_episodes = 3;
  cfg.seed = seed;
  cfg.wall_clock = false;
  return cfg;
}

const Checkpoint& trained() {
  static const Checkpoint c = run_training(tiny_config()).checkpoint;
  return c;
}

std::string section_of(const std::string& text) {
  try {
    load_checkpoint(text);
  } catch (const ParseError& e) {
    return e.section();
  }
  return "";
}

}  // namespace

TEST_CASE("checkpoint round-trips bit for bit") {
  const auto& c = trained();
  const std::string text = save_checkpoint(c);
  const auto loaded = load_checkpoint(text, c.config_hash);
  CHECK(loaded.warnings.empty());
  CHECK(loaded.checkpoint == c);
  CHECK(save_checkpoint(loaded.checkpoint) == text);

  const auto env = sim::EnvConfig::for_variant(sim::Variant::Wall);
  const auto a = evaluate(c, env, 5, 99);
  const auto b = evaluate(loaded.checkpoint, env, 5, 99);
  CHECK(a.success_rate == b.success_rate);
  CHECK(a.mean_reward == b.mean_reward);
}

TEST_CASE("file save is atomic and readable") {
  const auto dir = std::filesystem::temp_directory_path() / "gcrl_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "c.json").string();
  save_checkpoint_file(trained(), path);
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK(load_checkpoint_file(path).checkpoint == trained());
  CHECK_THROWS_AS(load_checkpoint_file((dir / "missing.json").string()), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("every truncation is rejected") {
  const std::string text = save_checkpoint(trained());
  const std::size_t stride = text.size() / 150 + 1;
  for (std::size_t n = 0; n + 2 < text.size(); n += stride) {
    CAPTURE(n);
    CHECK(section_of(text.substr(0, n)) == "json");
  }
}

TEST_CASE("damage is reported by section") {
  const auto base = nlohmann::json::parse(save_checkpoint(trained()));
  const auto damaged = [&](auto&& edit) {
    auto j = base;
    edit(j);
    return section_of(j.dump());
  };
  CHECK(damaged([](auto& j) { j.erase("version"); }) == "header");
  CHECK(damaged([](auto& j) { j["version"] = kCheckpointVersion + 1; }) == "header");
  CHECK(damaged([](auto& j) { j["config_hash"] = "xyz"; }) == "header");
  CHECK(damaged([](auto& j) { j["hyperparams"]["gamma"] = "high"; }) == "hyperparams");
  CHECK(damaged([](auto& j) { j["env"]["dt_physics"] = -1.0; }) == "env");
  CHECK(damaged([](auto& j) { j["networks"].erase("actor"); }) == "networks.actor");
  CHECK(damaged([](auto& j) { j["networks"]["critic_target"] = j["networks"]["actor"]; }) ==
        "networks.critic_target");
  CHECK(damaged([](auto& j) { j["optimizers"]["critic"] = j["optimizers"]["actor"]; }) ==
        "optimizers.critic");
  CHECK(damaged([](auto& j) { j["normalizers"]["goal"] = j["normalizers"]["obs"]; }) ==
        "normalizers.goal");
  CHECK(damaged([](auto& j) { j["rng"] = "not a state"; }) == "rng");
}

TEST_CASE("config hash mismatch warns") {
  const auto& c = trained();
  const auto loaded = load_checkpoint(save_checkpoint(c), c.config_hash ^ 1u);
  REQUIRE(loaded.warnings.size() == 1);
  CHECK(loaded.warnings[0].find("hash") != std::string::npos);
  CHECK(loaded.checkpoint == c);
}
