#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gcrl::sim {

using Eigen::Vector2d;
using Eigen::Vector3d;

enum class Variant { Flat, Wall, Ditch, TargetNear, TargetMoving, TargetExpanding, RStateSp };

// CLI spelling: flat, wall, ditch, target-near, target-moving,
// target-expanding, rstatesp.
std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);
const std::vector<Variant>& all_variants();

enum class Constraint { None, Wall, Ditch };

struct Aabb {
  Vector3d lo = Vector3d::Zero();
  Vector3d hi = Vector3d::Zero();
};

// World geometry, in metres. The table top is the z = 0 plane and the
// gripper's start position projects onto the origin.
struct EnvConfig {
  Variant variant = Variant::Wall;

  double table_x_min = -0.275;
  double table_x_max = 0.55;
  double table_y_half = 0.325;
  double floor_z = -0.7;

  Constraint constraint = Constraint::Wall;
  double constraint_x = 0.28;        // near face, seen from the robot
  double constraint_width = 0.01;
  double constraint_height = 0.03;   // wall height, or ditch depth

  double target_x_min = 0.25;
  double target_x_max = 0.55;
  double target_y_min = -0.15;
  double target_y_max = 0.15;
  double variant_rate = 0.0;  // m per global environment step

  int episode_len = 60;
  double dt_control = 0.046;
  double dt_physics = 0.002;

  Aabb gripper_workspace{Vector3d(-0.15, -0.30, 0.0), Vector3d(0.27, 0.30, 0.30)};
  Vector3d gripper_start = Vector3d(0.0, 0.0, 0.05);
  double action_scale = 0.033;  // m of gripper displacement per unit action

  double finger_max_gap = 0.10;
  double finger_start_gap = 0.05;
  double finger_speed = 1.0;       // m/s of gap change
  double finger_thickness = 0.01;  // along y
  double finger_width = 0.02;      // along x
  double finger_length = 0.05;     // along z
  double palm_height = 0.02;

  double box_half_extent = 0.025;
  double box_mass = 2.0;
  Vector2d box_start = Vector2d(0.10, 0.0);
  double box_start_jitter = 0.02;

  double gravity = 9.81;
  double friction = 0.4;
  double restitution = 0.4;
  double restitution_threshold = 0.05;  // impacts slower than this do not bounce
  double box_stiffness = 8e3;           // N/m, elastic squeeze of the box
  double max_compression = 0.025;
  double press_lever = 1.5;  // tilt of the release direction per unit press offset

  double success_tolerance = 0.05;

  static EnvConfig for_variant(Variant v);

  int substeps() const;
  int state_dim() const;
  // Throws ConfigError when geometry is inconsistent or the contact
  // parameters leave the energy-stable range.
  void validate() const;
};

EnvConfig load_env_config(std::string_view json_text);
EnvConfig load_env_config_file(const std::string& path);
std::string to_json(const EnvConfig& cfg);

struct SimState {
  Vector3d gripper_pos = Vector3d::Zero();
  Vector3d gripper_vel = Vector3d::Zero();
  Vector2d finger_positions = Vector2d::Zero();   // half-gap per finger
  Vector2d finger_velocities = Vector2d::Zero();
  Vector3d box_pos = Vector3d::Zero();
  Vector3d box_vel = Vector3d::Zero();
  Vector3d box_rot = Vector3d::Zero();
  Vector3d box_rotvel = Vector3d::Zero();
  double box_compression = 0.0;
  Eigen::Vector2d press_point = Eigen::Vector2d::Zero();  // centroid of the last press contact
  Vector3d target = Vector3d::Zero();
  int step_index = 0;

  // Controller and contact bookkeeping.
  Vector3d gripper_cmd_vel = Vector3d::Zero();
  double finger_target_gap = 0.0;
  bool grasped = false;
  Vector3d grasp_offset = Vector3d::Zero();
  bool release_contact_suppressed = false;
  bool contact_this_step = false;
  double gripper_work = 0.0;  // net work done on the box by the gripper, J

  double finger_gap() const { return finger_positions.sum(); }
  bool operator==(const SimState&) const = default;
};

struct Observation {
  Eigen::VectorXd state;  // 25 entries (19 for RStateSp)
  Vector3d achieved_goal = Vector3d::Zero();
  Vector3d desired_goal = Vector3d::Zero();
};

struct StepInfo {
  bool is_success = false;
  bool gripper_box_contact = false;
  bool grasped = false;
  bool box_airborne = false;
};

struct StepResult {
  SimState state;
  Observation obs;
  double reward = -1.0;
  StepInfo info;
};

struct ResetResult {
  SimState state;
  Observation obs;
};

ResetResult reset(const EnvConfig& cfg, std::mt19937_64& rng);

// One control step: move the gripper target by action[0..2] * action_scale,
// drive the finger gap toward the action[3] set-point, and integrate the
// physics over `substeps()` fixed steps. Throws StateError past the last
// step of the episode.
StepResult step(const SimState& state, const Eigen::Vector4d& action, const EnvConfig& cfg);

// One physics substep of length dt.
SimState integrate_physics(const SimState& state, const EnvConfig& cfg, double dt);

Observation observe(const SimState& state, const EnvConfig& cfg);

// Target-range drift for the moving/expanding variants after `global_step`
// environment steps. Other variants are returned unchanged.
EnvConfig apply_variant_rule(const EnvConfig& cfg, std::int64_t global_step);

// Kinetic + rotational + gravitational (relative to resting on the table)
// + elastic energy of the box.
double box_energy(const SimState& state, const EnvConfig& cfg);

// Height of the highest surface under the box footprint that can support it
// (tipping over edges taken into account).
double support_height(const SimState& state, const EnvConfig& cfg);

bool box_overlaps_obstacle(const SimState& state, const EnvConfig& cfg, double tol);

}  // namespace gcrl::sim
