#include "gcrl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <tuple>

#include "gcrl/errors.hpp"
#include "gcrl/simenv.hpp"
#include "text_util.hpp"

namespace gcrl::analysis {

namespace {

bool in_contact(const StepRecord& s) { return s.gripper_box_contact || s.grasped; }

Eigen::Vector3d box_before(const EpisodeLog& log, int step) {
  if (step > 0) return log.steps[static_cast<std::size_t>(step - 1)].box_pos;
  if (!log.box_start.isZero()) return log.box_start;
  return log.steps.front().box_pos;
}

// Index into `events` of the event that put the box on target: the last
// one starting no later than the first success step. Without a success it
// is the last event.
int decisive_event(const std::vector<ActionEvent>& events, int first_success) {
  int found = -1;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (first_success < 0 || events[i].start_step <= first_success) found = static_cast<int>(i);
  }
  return found;
}

// Released into free motion: out of contact on the next step and moving
// faster than release_speed.
bool is_attempt(const EpisodeLog& log, const ActionEvent& e, const AnalysisConfig& cfg) {
  const auto next = static_cast<std::size_t>(e.end_step + 1);
  if (next >= log.steps.size()) return false;
  const StepRecord& s = log.steps[next];
  return !in_contact(s) && s.box_vel.norm() > cfg.release_speed;
}

double gauss(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

std::string_view to_string(EventKind kind) {
  return kind == EventKind::Grab ? "grab" : "punch";
}

void AnalysisConfig::validate() const {
  if (!(punch_threshold >= 0.0)) throw ConfigError("punch_threshold must be >= 0");
  if (!(release_speed >= 0.0)) throw ConfigError("release_speed must be >= 0");
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be > 0");
  if (!(bin_width > 0.0)) throw ConfigError("bin_width must be > 0");
  if (episode_len < 1) throw ConfigError("episode_len must be >= 1");
}

std::vector<ActionEvent> classify_events(const EpisodeLog& log, const AnalysisConfig& cfg) {
  validate_log(log, cfg.episode_len);
  std::vector<ActionEvent> events;
  const int n = static_cast<int>(log.steps.size());
  int t = 0;
  while (t < n) {
    if (!in_contact(log.steps[static_cast<std::size_t>(t)])) {
      ++t;
      continue;
    }
    const int start = t;
    bool grasped = false;
    while (t < n && in_contact(log.steps[static_cast<std::size_t>(t)])) {
      grasped = grasped || log.steps[static_cast<std::size_t>(t)].grasped;
      ++t;
    }
    const int end = t - 1;
    const Eigen::Vector3d after = log.steps[static_cast<std::size_t>(std::min(end + 1, n - 1))].box_pos;
    const double moved = (after - box_before(log, start)).norm();
    if (moved > cfg.punch_threshold) {
      events.push_back({grasped ? EventKind::Grab : EventKind::Punch, start, end, moved});
    }
  }
  return events;
}

AttemptCount count_attempts(const EpisodeLog& log, const AnalysisConfig& cfg) {
  const auto events = classify_events(log, cfg);
  const int first_success = log.first_success_step();
  AttemptCount c;
  c.events = static_cast<int>(events.size());
  int before = 0;
  for (const auto& e : events) {
    if (!is_attempt(log, e, cfg)) continue;
    ++c.attempts;
    if (first_success >= 0 && e.end_step < first_success) ++before;
  }
  if (first_success >= 0) {
    const int d = decisive_event(events, first_success);
    const bool decisive_counted = d >= 0 && is_attempt(log, events[static_cast<std::size_t>(d)], cfg) &&
                                  events[static_cast<std::size_t>(d)].end_step < first_success;
    c.attempts_before_success = before - (decisive_counted ? 1 : 0);
    c.steps_remaining = cfg.episode_len - first_success;
  } else {
    c.attempts_before_success = c.attempts;
  }
  return c;
}

double kde_density(std::span<const double> samples, double x, double bandwidth,
                   std::optional<Bounds> bounds) {
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be > 0");
  if (samples.empty()) return 0.0;
  if (bounds && (x < bounds->first || x > bounds->second)) return 0.0;
  double sum = 0.0;
  for (double s : samples) {
    sum += gauss((x - s) / bandwidth);
    if (bounds) {
      sum += gauss((x - (2.0 * bounds->first - s)) / bandwidth);
      sum += gauss((x - (2.0 * bounds->second - s)) / bandwidth);
    }
  }
  return sum / (static_cast<double>(samples.size()) * bandwidth);
}

DensityCurve kde_curve(std::span<const double> samples, double bandwidth,
                       std::optional<Bounds> bounds, int points) {
  if (points < 2) throw ConfigError("kde_curve needs at least two points");
  double lo = 0.0;
  double hi = 1.0;
  if (bounds) {
    lo = bounds->first;
    hi = bounds->second;
  } else if (!samples.empty()) {
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    lo = *mn - 6.0 * bandwidth;
    hi = *mx + 6.0 * bandwidth;
  }
  DensityCurve c;
  c.x.reserve(static_cast<std::size_t>(points));
  c.density.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    c.x.push_back(x);
    c.density.push_back(kde_density(samples, x, bandwidth, bounds));
  }
  return c;
}

std::optional<Bounds> target_bounds(std::string_view variant) {
  for (sim::Variant v : sim::all_variants()) {
    if (sim::to_string(v) == variant) {
      const auto cfg = sim::EnvConfig::for_variant(v);
      return Bounds{cfg.target_x_min, cfg.target_x_max};
    }
  }
  return std::nullopt;
}

EpisodeRow summarize_episode(const EpisodeLog& log, const AnalysisConfig& cfg) {
  const auto events = classify_events(log, cfg);
  const AttemptCount attempts = count_attempts(log, cfg);
  EpisodeRow r;
  r.variant = log.variant;
  r.seed = log.seed;
  r.episode_index = log.episode_index;
  r.target_x = log.target.x();
  r.target_y = log.target.y();
  r.target_distance = log.target.head<2>().norm();
  r.cumulative_reward = log.cumulative_reward();
  r.success = log.steps.back().reward == 0.0;
  r.first_success_step = log.first_success_step();
  r.steps_remaining = attempts.steps_remaining;
  for (const auto& e : events) (e.kind == EventKind::Grab ? r.grabs : r.punches) += 1;
  r.attempts = attempts.attempts;
  r.attempts_before_success = attempts.attempts_before_success;
  const int d = decisive_event(events, r.first_success_step);
  r.kind = d < 0 ? "none" : std::string(to_string(events[static_cast<std::size_t>(d)].kind));
  return r;
}

Aggregator::Aggregator(AnalysisConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Aggregator::add(const EpisodeLog& log) { rows_.push_back(summarize_episode(log, cfg_)); }

void Aggregator::merge(const Aggregator& other) {
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

Tables Aggregator::finish() const {
  if (rows_.empty()) throw StateError("no episodes to aggregate");
  Tables t;
  t.bandwidth = cfg_.bandwidth;
  t.episodes = rows_;
  std::sort(t.episodes.begin(), t.episodes.end(), [](const EpisodeRow& a, const EpisodeRow& b) {
    return std::tie(a.variant, a.seed, a.episode_index, a.target_x, a.target_y) <
           std::tie(b.variant, b.seed, b.episode_index, b.target_x, b.target_y);
  });

  std::map<std::string, std::vector<const EpisodeRow*>> by_variant;
  for (const auto& r : t.episodes) by_variant[r.variant].push_back(&r);

  for (const auto& [variant, rows] : by_variant) {
    double lo = rows.front()->target_x;
    double hi = lo;
    for (const auto* r : rows) {
      lo = std::min(lo, r->target_x);
      hi = std::max(hi, r->target_x);
    }
    const auto known = target_bounds(variant);
    if (known) {
      lo = std::min(lo, known->first);
      hi = std::max(hi, known->second);
    }
    if (hi - lo < cfg_.bin_width) hi = lo + cfg_.bin_width;
    const int bins = std::max(1, static_cast<int>(std::ceil((hi - lo) / cfg_.bin_width - 1e-9)));
    std::vector<SuccessBin> table(static_cast<std::size_t>(bins));
    std::vector<double> successes;
    // Edges snapped to a 1e-12 grid so 0.25 + 16 * 0.01 prints as 0.41.
    const auto edge = [&](int i) { return std::round((lo + i * cfg_.bin_width) * 1e12) / 1e12; };
    for (int i = 0; i < bins; ++i) {
      auto& b = table[static_cast<std::size_t>(i)];
      b.variant = variant;
      b.x_lo = edge(i);
      b.x_hi = edge(i + 1);
    }
    for (const auto* r : rows) {
      const int i = std::clamp(static_cast<int>(std::floor((r->target_x - lo) / cfg_.bin_width)), 0,
                               bins - 1);
      auto& b = table[static_cast<std::size_t>(i)];
      ++b.episodes;
      if (r->success) {
        ++b.successes;
        successes.push_back(r->target_x);
      }
    }
    const Bounds support{lo, lo + bins * cfg_.bin_width};
    for (auto& b : table) {
      b.success_rate = b.episodes > 0 ? static_cast<double>(b.successes) / b.episodes : 0.0;
      b.success_density = kde_density(successes, 0.5 * (b.x_lo + b.x_hi), cfg_.bandwidth, support);
    }
    t.success_vs_x.insert(t.success_vs_x.end(), table.begin(), table.end());

    VariantSummary s;
    s.variant = variant;
    s.episodes = static_cast<int>(rows.size());
    double reward = 0.0;
    double attempts = 0.0;
    int wins = 0;
    for (const auto* r : rows) {
      wins += r->success ? 1 : 0;
      reward += r->cumulative_reward;
      attempts += r->attempts;
      s.grab_events += r->grabs;
      s.punch_events += r->punches;
    }
    s.success_rate = static_cast<double>(wins) / s.episodes;
    s.mean_reward = reward / s.episodes;
    s.mean_attempts = attempts / s.episodes;
    t.summary.push_back(s);
  }

  std::map<int, std::pair<int, double>> hist;
  for (const auto& r : t.episodes) {
    auto& h = hist[r.attempts];
    h.first += 1;
    h.second += r.steps_remaining;
  }
  for (const auto& [attempts, h] : hist) {
    t.attempts.push_back({attempts, h.first, h.second / h.first});
  }
  return t;
}

Tables aggregate(std::span<const EpisodeLog> logs, const AnalysisConfig& cfg) {
  Aggregator agg(cfg);
  for (const auto& log : logs) agg.add(log);
  return agg.finish();
}

std::vector<std::string> write_tables(const Tables& t, const std::string& dir) {
  using detail::csv_field;
  using detail::format_double;
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  const auto write = [&](const char* name, const std::string& header, const auto& rows,
                         const auto& format) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << header << detail::kCsvEol;
    for (const auto& r : rows) out << format(r) << detail::kCsvEol;
    if (!out) throw Error("failed writing '" + path + "'");
    written.push_back(path);
  };
  const auto num = [](double v) { return format_double(v); };
  const auto i64 = [](auto v) { return std::to_string(v); };

  write("episodes.csv",
        "variant,seed,episode_index,target_x,target_y,target_distance,cumulative_reward,"
        "success,first_success_step,steps_remaining,grabs,punches,attempts,"
        "attempts_before_success,kind",
        t.episodes, [&](const EpisodeRow& r) {
          return csv_field(r.variant) + "," + i64(r.seed) + "," + i64(r.episode_index) + "," +
                 num(r.target_x) + "," + num(r.target_y) + "," + num(r.target_distance) + "," +
                 num(r.cumulative_reward) + "," + (r.success ? "1" : "0") + "," +
                 i64(r.first_success_step) + "," + i64(r.steps_remaining) + "," + i64(r.grabs) +
                 "," + i64(r.punches) + "," + i64(r.attempts) + "," +
                 i64(r.attempts_before_success) + "," + r.kind;
        });
  write("reward_vs_distance.csv", "variant,kind,target_distance,cumulative_reward", t.episodes,
        [&](const EpisodeRow& r) {
          return csv_field(r.variant) + "," + r.kind + "," + num(r.target_distance) + "," +
                 num(r.cumulative_reward);
        });
  write("success_vs_x.csv", "variant,x_lo,x_hi,episodes,successes,success_rate,success_density",
        t.success_vs_x, [&](const SuccessBin& b) {
          return csv_field(b.variant) + "," + num(b.x_lo) + "," + num(b.x_hi) + "," +
                 i64(b.episodes) + "," + i64(b.successes) + "," + num(b.success_rate) + "," +
                 num(b.success_density);
        });
  write("attempts_histogram.csv", "attempts,episodes,mean_steps_remaining", t.attempts,
        [&](const AttemptBin& b) {
          return i64(b.attempts) + "," + i64(b.episodes) + "," + num(b.mean_steps_remaining);
        });
  write("summary.csv",
        "variant,episodes,success_rate,mean_reward,grab_events,punch_events,mean_attempts",
        t.summary, [&](const VariantSummary& s) {
          return csv_field(s.variant) + "," + i64(s.episodes) + "," + num(s.success_rate) + "," +
                 num(s.mean_reward) + "," + i64(s.grab_events) + "," + i64(s.punch_events) + "," +
                 num(s.mean_attempts);
        });
  return written;
}

}  // namespace gcrl::analysis
