#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gcrl/analysis.hpp"
#include "gcrl/errors.hpp"

using namespace gcrl;
using namespace gcrl::analysis;

namespace {

const std::string kFixtures = GCRL_FIXTURE_DIR;

std::vector<EpisodeLog> fixture_logs() {
  return read_log_file(kFixtures + "/analysis_traces.jsonl");
}

nlohmann::json fixture_labels() {
  std::ifstream in(kFixtures + "/analysis_labels.json");
  REQUIRE(in);
  return nlohmann::json::parse(in);
}

// Box sits still unless a random contact run moves it; some runs are
// grasped and some end in a fast release.
EpisodeLog random_log(std::mt19937_64& rng, const std::string& variant = "wall") {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EpisodeLog log;
  log.variant = variant;
  log.seed = rng();
  log.target = Eigen::Vector3d(0.25 + 0.3 * u(rng), -0.15 + 0.3 * u(rng), 0.025);
  log.box_start = Eigen::Vector3d(0.1, 0.0, 0.025);
  Eigen::Vector3d box = log.box_start;
  bool contact = false, grasped = false;
  for (int t = 0; t < 60; ++t) {
    if (u(rng) < 0.15) {
      contact = !contact;
      grasped = contact && u(rng) < 0.4;
    }
    StepRecord s;
    s.step = t;
    s.gripper_box_contact = contact;
    s.grasped = grasped;
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    if (contact || u(rng) < 0.2) v = Eigen::Vector3d(u(rng) - 0.3, u(rng) - 0.5, 0.0) * 0.5;
    box += v * 0.046;
    s.box_pos = box;
    s.box_vel = v;
    s.reward = (box - log.target).head<2>().norm() < 0.05 ? 0.0 : -1.0;
    log.steps.push_back(s);
  }
  return log;
}

}  // namespace

TEST_CASE("hand-labelled synthetic traces") {
  const auto logs = fixture_logs();
  const auto labels = fixture_labels();
  REQUIRE(logs.size() == labels.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& log = logs[i];
    const auto& label = labels[i];
    CAPTURE(label.at("name").get<std::string>());
    REQUIRE(log.episode_index == label.at("episode_index").get<std::uint64_t>());

    const auto events = classify_events(log);
    const auto& want = label.at("events");
    REQUIRE(events.size() == want.size());
    for (std::size_t k = 0; k < events.size(); ++k) {
      CHECK(to_string(events[k].kind) == want[k][0].get<std::string>());
      CHECK(events[k].start_step == want[k][1].get<int>());
      CHECK(events[k].end_step == want[k][2].get<int>());
    }

    const auto c = count_attempts(log);
    CHECK(c.events == static_cast<int>(want.size()));
    CHECK(c.attempts == label.at("attempts").get<int>());
    CHECK(c.attempts_before_success == label.at("attempts_before_success").get<int>());
    CHECK(c.steps_remaining == label.at("steps_remaining").get<int>());

    const auto row = summarize_episode(log);
    CHECK(row.first_success_step == label.at("first_success_step").get<int>());
    CHECK(row.success == label.at("success").get<bool>());
    CHECK(row.kind == label.at("kind").get<std::string>());
  }
}

TEST_CASE("two grabs then a throw on target") {
  const auto logs = fixture_logs();
  const auto it = std::find_if(logs.begin(), logs.end(),
                               [](const EpisodeLog& l) { return l.episode_index == 4; });
  REQUIRE(it != logs.end());
  const auto events = classify_events(*it);
  REQUIRE(events.size() == 2);
  CHECK(events[0].kind == EventKind::Grab);
  CHECK(events[1].kind == EventKind::Grab);
  const auto c = count_attempts(*it);
  CHECK(c.attempts == 2);
  CHECK(c.attempts_before_success == 1);
  CHECK(summarize_episode(*it).kind == "grab");
}

TEST_CASE("events are ordered, disjoint, in range and above threshold") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto log = random_log(rng);
    const auto events = classify_events(log);
    int last_end = -1;
    for (const auto& e : events) {
      REQUIRE(e.start_step <= e.end_step);
      REQUIRE(e.start_step > last_end);
      REQUIRE(e.start_step >= 0);
      REQUIRE(e.end_step < 60);
      REQUIRE(e.box_displacement >= 0.01);
      last_end = e.end_step;
    }
    // Pure: same input, same output.
    REQUIRE(classify_events(log) == events);
    REQUIRE(count_attempts(log) == count_attempts(log));
    const auto c = count_attempts(log);
    REQUIRE(c.attempts <= c.events);
    REQUIRE(c.attempts_before_success <= c.attempts);
  }
}

TEST_CASE("thresholds are configurable") {
  const auto logs = fixture_logs();
  AnalysisConfig strict;
  strict.punch_threshold = 1.0;
  for (const auto& log : logs) CHECK(classify_events(log, strict).empty());
  AnalysisConfig bad;
  bad.bandwidth = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("reflected KDE integrates to one on its support") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.25, 0.55);
  std::vector<double> xs(500);
  for (auto& x : xs) x = 0.25 + std::pow(u(rng) - 0.25, 2.0) / 0.3;  // skewed toward 0.25
  const auto curve = kde_curve(xs, 0.02, Bounds{0.25, 0.55}, 2001);
  double integral = 0.0;
  for (std::size_t i = 1; i < curve.x.size(); ++i) {
    integral += 0.5 * (curve.density[i] + curve.density[i - 1]) * (curve.x[i] - curve.x[i - 1]);
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));

  const auto open = kde_curve(xs, 0.02, std::nullopt, 2001);
  double open_integral = 0.0;
  for (std::size_t i = 1; i < open.x.size(); ++i) {
    open_integral += 0.5 * (open.density[i] + open.density[i - 1]) * (open.x[i] - open.x[i - 1]);
  }
  CHECK(open_integral == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(kde_density(xs, 0.6, 0.02, Bounds{0.25, 0.55}) == 0.0);
  CHECK(kde_density({}, 0.3, 0.02) == 0.0);
  CHECK_THROWS_AS(kde_density(xs, 0.3, 0.0), ConfigError);
}

TEST_CASE("single-sample KDE is the Gaussian kernel") {
  const std::vector<double> one{0.4};
  const double h = 0.02;
  const double peak = 1.0 / (h * std::sqrt(2.0 * 3.14159265358979323846));
  CHECK(kde_density(one, 0.4, h) == doctest::Approx(peak).epsilon(1e-12));
  CHECK(kde_density(one, 0.42, h) == doctest::Approx(peak * std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("success density over a uniform target sampler is flat") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> tx(0.25, 0.55);
  Aggregator agg;
  for (int i = 0; i < 20000; ++i) {
    EpisodeLog log;
    log.variant = "wall";
    log.seed = static_cast<std::uint64_t>(i);
    log.target = Eigen::Vector3d(tx(rng), 0.0, 0.025);
    for (int t = 0; t < 60; ++t) {
      StepRecord s;
      s.step = t;
      s.box_pos = log.target;
      s.reward = 0.0;
      log.steps.push_back(s);
    }
    agg.add(log);
  }
  const auto tables = agg.finish();
  REQUIRE(tables.success_vs_x.size() == 30);
  const double flat = 1.0 / 0.30;
  for (const auto& b : tables.success_vs_x) {
    CHECK(b.success_density == doctest::Approx(flat).epsilon(0.10));
    CHECK(b.success_rate == 1.0);
  }
}

TEST_CASE("aggregation does not depend on order or partition") {
  std::mt19937_64 rng(4);
  std::vector<EpisodeLog> logs;
  for (int i = 0; i < 200; ++i) logs.push_back(random_log(rng, i % 3 ? "wall" : "ditch"));
  const auto all = aggregate(logs);

  Aggregator a, b;
  for (std::size_t i = 0; i < logs.size(); ++i) (i % 2 ? a : b).add(logs[i]);
  b.merge(a);
  auto reversed = logs;
  std::reverse(reversed.begin(), reversed.end());
  const auto merged = b.finish();
  const auto rev = aggregate(reversed);

  const auto dir = std::filesystem::temp_directory_path() / "gcrl_analysis_order";
  std::filesystem::remove_all(dir);
  const auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const auto p1 = write_tables(all, (dir / "a").string());
  const auto p2 = write_tables(merged, (dir / "b").string());
  const auto p3 = write_tables(rev, (dir / "c").string());
  REQUIRE(p1.size() == 5);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(slurp(p1[i]) == slurp(p2[i]));
    CHECK(slurp(p1[i]) == slurp(p3[i]));
  }
  CHECK(render_success_density_svg(all) == render_success_density_svg(rev));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(Aggregator().finish(), StateError);
}

TEST_CASE("tables are RFC 4180 CSV with CRLF line ends") {
  const auto tables = aggregate(fixture_logs());
  const auto dir = std::filesystem::temp_directory_path() / "gcrl_analysis_csv";
  std::filesystem::remove_all(dir);
  const auto paths = write_tables(tables, dir.string());
  std::ifstream in(paths[0], std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.rfind("variant,seed,episode_index,target_x,", 0) == 0);
  std::size_t lines = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') {
      REQUIRE(i > 0);
      CHECK(text[i - 1] == '\r');
      ++lines;
    }
  }
  CHECK(lines == 1 + tables.episodes.size());
  std::filesystem::remove_all(dir);

  // A variant name with a comma and a quote is quoted.
  auto logs = fixture_logs();
  logs[0].variant = "wall, \"v2\"";
  const auto quoted = aggregate(logs);
  const auto qdir = std::filesystem::temp_directory_path() / "gcrl_analysis_quote";
  const auto qpaths = write_tables(quoted, qdir.string());
  std::ifstream qin(qpaths[0], std::ios::binary);
  std::string qtext((std::istreambuf_iterator<char>(qin)), {});
  CHECK(qtext.find("\"wall, \"\"v2\"\"\",") != std::string::npos);
  std::filesystem::remove_all(qdir);
}

TEST_CASE("attempt histogram and summary") {
  const auto tables = aggregate(fixture_logs());
  REQUIRE(tables.summary.size() == 1);
  const auto& s = tables.summary[0];
  CHECK(s.episodes == 10);
  CHECK(s.success_rate == doctest::Approx(0.3));
  CHECK(s.grab_events == 4);
  CHECK(s.punch_events == 8);
  // attempts per episode: 0,0,0,1,2,0,1,3,0,1
  REQUIRE(tables.attempts.size() == 4);
  CHECK(tables.attempts[0].attempts == 0);
  CHECK(tables.attempts[0].episodes == 5);
  CHECK(tables.attempts[1].episodes == 3);
  CHECK(tables.attempts[1].mean_steps_remaining == doctest::Approx((45 + 43 + 49) / 3.0));
  CHECK(tables.attempts[2].episodes == 1);
  CHECK(tables.attempts[2].mean_steps_remaining == doctest::Approx(30.0));
  CHECK(tables.attempts[3].attempts == 3);
}

TEST_CASE("plots match the golden files") {
  const auto tables = aggregate(fixture_logs());
  const std::pair<const char*, std::string> plots[] = {
      {"golden_reward_vs_distance.svg", render_reward_distance_svg(tables)},
      {"golden_attempts.svg", render_attempts_svg(tables)},
      {"golden_success_density.svg", render_success_density_svg(tables)}};
  for (const auto& [name, svg] : plots) {
    const std::string path = kFixtures + "/" + name;
    if (std::getenv("GCRL_UPDATE_GOLDEN")) {
      std::ofstream(path, std::ios::binary) << svg;
    }
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    const std::string golden((std::istreambuf_iterator<char>(in)), {});
    CHECK(svg == golden);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
  }
}
