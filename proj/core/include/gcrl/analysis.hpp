#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gcrl/episode_log.hpp"

namespace gcrl::analysis {

enum class EventKind { Grab, Punch };

std::string_view to_string(EventKind kind);

struct ActionEvent {
  EventKind kind = EventKind::Punch;
  int start_step = 0;
  int end_step = 0;  // inclusive
  double box_displacement = 0.0;  // m, from before the contact to after it

  bool operator==(const ActionEvent&) const = default;
};

struct AnalysisConfig {
  double punch_threshold = 0.01;  // m of box displacement
  double release_speed = 0.05;    // m/s of box speed after contact ends
  double bandwidth = 0.02;        // m, Gaussian KDE
  double bin_width = 0.01;        // m
  int episode_len = 60;

  void validate() const;
};

// Maximal runs of gripper-box contact that moved the box more than
// punch_threshold. A run with any grasped step is a Grab, otherwise a
// Punch. Other runs are dropped.
std::vector<ActionEvent> classify_events(const EpisodeLog& log, const AnalysisConfig& cfg = {});

struct AttemptCount {
  int events = 0;
  // Events after which the box leaves contact faster than release_speed.
  int attempts = 0;
  // Attempts before the one that first puts the box on target; equal to
  // `attempts` when the episode never succeeds.
  int attempts_before_success = 0;
  int steps_remaining = 0;  // episode_len - first success step, or 0

  bool operator==(const AttemptCount&) const = default;
};

AttemptCount count_attempts(const EpisodeLog& log, const AnalysisConfig& cfg = {});

// Gaussian kernel density estimate at `x`. With `bounds`, samples are
// reflected at both ends so the estimate integrates to one over the
// interval.
using Bounds = std::pair<double, double>;
double kde_density(std::span<const double> samples, double x, double bandwidth,
                   std::optional<Bounds> bounds = std::nullopt);

struct DensityCurve {
  std::vector<double> x;
  std::vector<double> density;
};

// Evaluates the estimate on `points` evenly spaced positions across the
// bounds, or across the sample range padded by six bandwidths.
DensityCurve kde_curve(std::span<const double> samples, double bandwidth,
                       std::optional<Bounds> bounds = std::nullopt, int points = 401);

// Target-x support of a variant by name, if it is known.
std::optional<Bounds> target_bounds(std::string_view variant);

struct EpisodeRow {
  std::string variant;
  std::uint64_t seed = 0;
  std::uint64_t episode_index = 0;
  double target_x = 0.0;
  double target_y = 0.0;
  double target_distance = 0.0;  // planar distance from the gripper origin
  double cumulative_reward = 0.0;
  bool success = false;          // on target at the final step
  int first_success_step = -1;
  int steps_remaining = 0;
  int grabs = 0;
  int punches = 0;
  int attempts = 0;
  int attempts_before_success = 0;
  std::string kind;  // "grab", "punch" or "none": the event that decided the episode
};

struct SuccessBin {
  std::string variant;
  double x_lo = 0.0;
  double x_hi = 0.0;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double success_density = 0.0;  // KDE of successful target x at the bin centre
};

struct AttemptBin {
  int attempts = 0;
  int episodes = 0;
  double mean_steps_remaining = 0.0;
};

struct VariantSummary {
  std::string variant;
  int episodes = 0;
  double success_rate = 0.0;
  double mean_reward = 0.0;
  int grab_events = 0;
  int punch_events = 0;
  double mean_attempts = 0.0;
};

struct Tables {
  std::vector<EpisodeRow> episodes;
  std::vector<SuccessBin> success_vs_x;
  std::vector<AttemptBin> attempts;
  std::vector<VariantSummary> summary;
  double bandwidth = 0.02;
};

EpisodeRow summarize_episode(const EpisodeLog& log, const AnalysisConfig& cfg = {});

// Streaming accumulator. Partial aggregators over disjoint log sets can be
// merged; finish() sorts rows so the result does not depend on merge order.
class Aggregator {
 public:
  explicit Aggregator(AnalysisConfig cfg = {});

  void add(const EpisodeLog& log);
  void merge(const Aggregator& other);
  std::size_t size() const { return rows_.size(); }

  // Throws StateError when no episode was added.
  Tables finish() const;

 private:
  AnalysisConfig cfg_;
  std::vector<EpisodeRow> rows_;
};

Tables aggregate(std::span<const EpisodeLog> logs, const AnalysisConfig& cfg = {});

// episodes.csv, reward_vs_distance.csv, success_vs_x.csv,
// attempts_histogram.csv, summary.csv
std::vector<std::string> write_tables(const Tables& tables, const std::string& dir);

// Reward vs target distance, attempts vs steps remaining, success density
// along x.
std::string render_reward_distance_svg(const Tables& tables);
std::string render_attempts_svg(const Tables& tables);
std::string render_success_density_svg(const Tables& tables);
std::vector<std::string> render_plots(const Tables& tables, const std::string& dir);

}  // namespace gcrl::analysis
