#include "gcrl/simenv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "gcrl/errors.hpp"
#include "gcrl/her_replay.hpp"

namespace gcrl::sim {

namespace {

constexpr double kGeomEps = 1e-9;
constexpr double kContactTol = 1e-3;

// A vertical prism of the static world: everything below `top` inside the
// rectangle is solid. The floor is an implicit infinite column at floor_z.
struct Column {
  double x0, x1, y0, y1, top;
};

struct Columns {
  std::array<Column, 4> items{};
  int count = 0;

  void add(const Column& c) { items[static_cast<std::size_t>(count++)] = c; }
  const Column* begin() const { return items.data(); }
  const Column* end() const { return items.data() + count; }
};

Columns world_columns(const EnvConfig& cfg) {
  Columns cols;
  const double y0 = -cfg.table_y_half;
  const double y1 = cfg.table_y_half;
  const double cx0 = cfg.constraint_x;
  const double cx1 = cfg.constraint_x + cfg.constraint_width;
  switch (cfg.constraint) {
    case Constraint::None:
      cols.add({cfg.table_x_min, cfg.table_x_max, y0, y1, 0.0});
      break;
    case Constraint::Wall:
      cols.add({cfg.table_x_min, cfg.table_x_max, y0, y1, 0.0});
      cols.add({cx0, cx1, y0, y1, cfg.constraint_height});
      break;
    case Constraint::Ditch:
      cols.add({cfg.table_x_min, cx0, y0, y1, 0.0});
      cols.add({cx0, cx1, y0, y1, -cfg.constraint_height});
      cols.add({cx1, cfg.table_x_max, y0, y1, 0.0});
      break;
  }
  return cols;
}

struct Rect {
  double x0, x1, y0, y1;
};

Rect footprint(const SimState& s, const EnvConfig& cfg) {
  const double h = cfg.box_half_extent;
  return {s.box_pos.x() - h, s.box_pos.x() + h, s.box_pos.y() - h, s.box_pos.y() + h};
}

double overlap_1d(double a0, double a1, double b0, double b1) {
  return std::min(a1, b1) - std::max(a0, b0);
}

// Highest column top under the footprint that lies at or below
// `prev_bottom` and whose contact patch surrounds the box's centre of mass.
// Patches that do not surround it (an edge, a narrow wall top) cannot hold
// the box and are skipped, which lets it tip off.
double support_from(const Rect& fp, const Vector2d& com, double prev_bottom,
                    const Columns& cols, double floor_z) {
  std::array<bool, 4> usable{};
  for (int i = 0; i < cols.count; ++i) {
    const Column& c = cols.items[static_cast<std::size_t>(i)];
    usable[static_cast<std::size_t>(i)] =
        overlap_1d(fp.x0, fp.x1, c.x0, c.x1) > kGeomEps &&
        overlap_1d(fp.y0, fp.y1, c.y0, c.y1) > kGeomEps && c.top <= prev_bottom + kGeomEps;
  }
  for (;;) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < cols.count; ++i) {
      if (usable[static_cast<std::size_t>(i)]) best = std::max(best, cols.items[static_cast<std::size_t>(i)].top);
    }
    if (!std::isfinite(best)) return floor_z;
    Rect hull{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (int i = 0; i < cols.count; ++i) {
      const Column& c = cols.items[static_cast<std::size_t>(i)];
      if (!usable[static_cast<std::size_t>(i)] || c.top < best - kGeomEps) continue;
      hull.x0 = std::min(hull.x0, std::max(fp.x0, c.x0));
      hull.x1 = std::max(hull.x1, std::min(fp.x1, c.x1));
      hull.y0 = std::min(hull.y0, std::max(fp.y0, c.y0));
      hull.y1 = std::max(hull.y1, std::min(fp.y1, c.y1));
    }
    if (com.x() >= hull.x0 - 1e-12 && com.x() <= hull.x1 + 1e-12 &&
        com.y() >= hull.y0 - 1e-12 && com.y() <= hull.y1 + 1e-12) {
      return best;
    }
    for (int i = 0; i < cols.count; ++i) {
      if (cols.items[static_cast<std::size_t>(i)].top >= best - kGeomEps) usable[static_cast<std::size_t>(i)] = false;
    }
  }
}

Aabb box_aabb(const SimState& s, const EnvConfig& cfg) {
  const double h = cfg.box_half_extent;
  Aabb b;
  b.lo = s.box_pos - Vector3d::Constant(h);
  b.hi = s.box_pos + Vector3d::Constant(h);
  b.hi.z() -= s.box_compression;
  return b;
}

// Fingertips sit at gripper_pos.z; fingers extend upward to the palm.
std::array<Aabb, 3> gripper_parts(const Vector3d& g, double gap, const EnvConfig& cfg) {
  const double hw = 0.5 * cfg.finger_width;
  const double t = cfg.finger_thickness;
  const double L = cfg.finger_length;
  std::array<Aabb, 3> parts;
  parts[0].lo = {g.x() - hw, g.y() - 0.5 * gap - t, g.z()};
  parts[0].hi = {g.x() + hw, g.y() - 0.5 * gap, g.z() + L};
  parts[1].lo = {g.x() - hw, g.y() + 0.5 * gap, g.z()};
  parts[1].hi = {g.x() + hw, g.y() + 0.5 * gap + t, g.z() + L};
  parts[2].lo = {g.x() - hw, g.y() - 0.5 * gap - t, g.z() + L};
  parts[2].hi = {g.x() + hw, g.y() + 0.5 * gap + t, g.z() + L + cfg.palm_height};
  return parts;
}

Vector3d penetration(const Aabb& a, const Aabb& b) {
  Vector3d p;
  for (int k = 0; k < 3; ++k) p[k] = std::min(a.hi[k] - b.lo[k], b.hi[k] - a.lo[k]);
  return p;
}

bool overlaps(const Aabb& a, const Aabb& b, double margin = 0.0) {
  const Vector3d p = penetration(a, b);
  return p.x() > -margin && p.y() > -margin && p.z() > -margin &&
         (margin > 0.0 || (p.x() > 0.0 && p.y() > 0.0 && p.z() > 0.0));
}

int min_axis(const Vector3d& pen) {
  int k = 0;
  if (pen.y() < pen[k]) k = 1;
  if (pen.z() < pen[k]) k = 2;
  return k;
}

Vector3d clamp_to(const Vector3d& p, const Aabb& box) {
  return p.cwiseMax(box.lo).cwiseMin(box.hi);
}

double box_inertia(const EnvConfig& cfg) {
  const double side = 2.0 * cfg.box_half_extent;
  return cfg.box_mass * side * side / 6.0;
}

double snap_quarter_turn(double angle) {
  const double q = 0.5 * std::numbers::pi;
  return std::round(angle / q) * q;
}

bool box_between_fingers(const SimState& s, double gap, const EnvConfig& cfg) {
  const double h = cfg.box_half_extent;
  const Vector3d& g = s.gripper_pos;
  const Vector3d& b = s.box_pos;
  if (std::abs(b.x() - g.x()) > h) return false;
  const double z_overlap = overlap_1d(g.z(), g.z() + cfg.finger_length, b.z() - h, b.z() + h);
  if (z_overlap < 0.01) return false;
  return std::abs(b.y() - g.y()) + h <= 0.5 * gap + kContactTol;
}

// Converts the stored squeeze into a launch impulse applied at the table
// contact below the press point.
void release_compression(SimState& s, const EnvConfig& cfg) {
  const double delta = s.box_compression;
  s.box_compression = 0.0;
  s.release_contact_suppressed = true;
  if (delta <= 0.0) return;
  const double h = cfg.box_half_extent;
  const double m = cfg.box_mass;
  const double inertia = box_inertia(cfg);
  const double stored = 0.5 * cfg.box_stiffness * delta * delta;
  const Vector2d offset = s.box_pos.head<2>() - s.press_point;
  Vector3d dir(cfg.press_lever * offset.x() / h, cfg.press_lever * offset.y() / h, 1.0);
  dir.normalize();
  const Vector3d lever(-offset.x(), -offset.y(), -h);
  const Vector3d torque_arm = lever.cross(dir);
  const double A = 0.5 * (1.0 / m + torque_arm.squaredNorm() / inertia);
  const double B = s.box_vel.dot(dir) + s.box_rotvel.dot(torque_arm);
  const double impulse = (-B + std::sqrt(B * B + 4.0 * A * stored)) / (2.0 * A);
  s.box_vel += impulse * dir / m;
  s.box_rotvel += impulse * torque_arm / inertia;
}

// Gripper-to-box contact for a free (not grasped) box: pushes, squeezing
// against a support, and release of a squeeze.
void gripper_box_contact(SimState& s, const Vector3d& gripper_vel, double gap,
                         const EnvConfig& cfg, const Columns& cols) {
  const double h = cfg.box_half_extent;
  auto parts = gripper_parts(s.gripper_pos, gap, cfg);
  double press_depth = 0.0;
  double press_area = 0.0;
  Vector2d press_centroid = Vector2d::Zero();

  for (const Aabb& part : parts) {
    Aabb box = box_aabb(s, cfg);
    if (overlaps(part, box, kContactTol)) s.contact_this_step = true;
    if (s.release_contact_suppressed) continue;

    const double ox = overlap_1d(part.lo.x(), part.hi.x(), box.lo.x(), box.hi.x());
    const double oy = overlap_1d(part.lo.y(), part.hi.y(), box.lo.y(), box.hi.y());
    if (ox <= 0.0 || oy <= 0.0) continue;
    const double top = box.hi.z();
    const bool above = 0.5 * (part.lo.z() + part.hi.z()) > s.box_pos.z();
    const double pen_z = top - part.lo.z();
    const bool touching_top = above && pen_z >= -kGeomEps;
    const bool z_is_min = min_axis(penetration(part, box)) == 2;
    const double bottom = s.box_pos.z() - h;
    const double support = support_from(footprint(s, cfg), s.box_pos.head<2>(), bottom,
                                        cols, cfg.floor_z);

    if (touching_top && (s.box_compression > 0.0 || (pen_z > 0.0 && z_is_min)) &&
        bottom - std::max(pen_z, 0.0) <= support + 1e-6) {
      if (bottom > support) s.box_pos.z() = support + h;
      s.box_vel.z() = 0.0;
      const double depth = s.box_pos.z() + h - part.lo.z();
      press_depth = std::max(press_depth, depth);
      const double area = ox * oy;
      const Vector2d c(0.5 * (std::max(part.lo.x(), box.lo.x()) + std::min(part.hi.x(), box.hi.x())),
                       0.5 * (std::max(part.lo.y(), box.lo.y()) + std::min(part.hi.y(), box.hi.y())));
      press_centroid += area * c;
      press_area += area;
      continue;
    }

    const Vector3d pen = penetration(part, box);
    if (pen.x() <= 0.0 || pen.y() <= 0.0 || pen.z() <= 0.0) continue;
    const int k = min_axis(pen);
    const double part_c = 0.5 * (part.lo[k] + part.hi[k]);
    const double box_c = 0.5 * (box.lo[k] + box.hi[k]);
    const double n = box_c >= part_c ? 1.0 : -1.0;
    s.box_pos[k] += n * pen[k];
    if (s.box_vel[k] * n < gripper_vel[k] * n) s.box_vel[k] = gripper_vel[k];
  }

  if (press_area > 0.0) {
    if (press_depth > cfg.max_compression) {
      s.gripper_pos.z() += press_depth - cfg.max_compression;
      press_depth = cfg.max_compression;
    }
    s.press_point = press_centroid / press_area;
    if (press_depth >= s.box_compression - kGeomEps) {
      s.box_compression = std::max(press_depth, 0.0);
    } else {
      release_compression(s, cfg);
    }
  } else if (s.box_compression > 0.0) {
    release_compression(s, cfg);
  }
}

// Static-world contacts: support from below with restitution and Coulomb
// friction, then lateral push-out from any column the box has entered.
// Returns the correction applied to the box position.
Vector3d resolve_world(SimState& s, const EnvConfig& cfg, const Columns& cols,
                       double prev_bottom, bool move_velocity) {
  const double h = cfg.box_half_extent;
  const Vector3d before = s.box_pos;
  const double support =
      support_from(footprint(s, cfg), s.box_pos.head<2>(), prev_bottom, cols, cfg.floor_z);
  if (s.box_pos.z() - h < support) {
    s.box_pos.z() = support + h;
    if (move_velocity) {
      const double impact = std::max(-s.box_vel.z(), 0.0);
      const double bounce = impact > cfg.restitution_threshold ? cfg.restitution * impact : 0.0;
      const double normal_dv = bounce - s.box_vel.z();
      s.box_vel.z() = bounce;
      const double speed = s.box_vel.head<2>().norm();
      const double drop = cfg.friction * std::max(normal_dv, 0.0);
      if (speed <= drop) {
        s.box_vel.head<2>().setZero();
      } else {
        s.box_vel.head<2>() *= 1.0 - drop / speed;
      }
      s.box_rotvel.setZero();
      for (int k = 0; k < 3; ++k) s.box_rot[k] = snap_quarter_turn(s.box_rot[k]);
    }
  }

  const double bottom = s.box_pos.z() - h;
  for (const Column& c : cols) {
    if (c.top <= bottom + kGeomEps) continue;
    const Rect fp = footprint(s, cfg);
    const double ox = overlap_1d(fp.x0, fp.x1, c.x0, c.x1);
    const double oy = overlap_1d(fp.y0, fp.y1, c.y0, c.y1);
    if (ox <= kGeomEps || oy <= kGeomEps) continue;
    const int k = ox <= oy ? 0 : 1;
    const double lo = k == 0 ? c.x0 : c.y0;
    const double hi = k == 0 ? c.x1 : c.y1;
    const double push_neg = (s.box_pos[k] + h) - lo;  // move toward -axis
    const double push_pos = hi - (s.box_pos[k] - h);  // move toward +axis
    const double n = push_neg <= push_pos ? -1.0 : 1.0;
    s.box_pos[k] += n * std::min(push_neg, push_pos);
    if (move_velocity) {
      const double vn = s.box_vel[k] * n;
      if (vn < 0.0) {
        const double impact = -vn;
        const double bounce = impact > cfg.restitution_threshold ? cfg.restitution * impact : 0.0;
        s.box_vel[k] = n * bounce;
      }
    }
  }
  return s.box_pos - before;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Flat: return "flat";
    case Variant::Wall: return "wall";
    case Variant::Ditch: return "ditch";
    case Variant::TargetNear: return "target-near";
    case Variant::TargetMoving: return "target-moving";
    case Variant::TargetExpanding: return "target-expanding";
    case Variant::RStateSp: return "rstatesp";
  }
  return "wall";
}

Variant variant_from_string(std::string_view name) {
  for (Variant v : all_variants()) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown environment '" + std::string(name) + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::Flat,         Variant::Wall,
                                      Variant::Ditch,        Variant::TargetNear,
                                      Variant::TargetMoving, Variant::TargetExpanding,
                                      Variant::RStateSp};
  return v;
}

EnvConfig EnvConfig::for_variant(Variant v) {
  EnvConfig c;
  c.variant = v;
  switch (v) {
    case Variant::Flat:
      c.constraint = Constraint::None;
      c.target_x_min = 0.15;
      c.target_x_max = 0.25;
      break;
    case Variant::Wall:
    case Variant::RStateSp:
      break;
    case Variant::Ditch:
      c.constraint = Constraint::Ditch;
      c.constraint_x = 0.2625;
      c.constraint_width = 0.025;
      c.constraint_height = 0.02;
      break;
    case Variant::TargetNear:
      c.target_x_min = 0.10;
      c.target_x_max = 0.70;
      break;
    case Variant::TargetMoving:
      c.variant_rate = 2.0e-8;  // 2.0e-6 cm per step
      break;
    case Variant::TargetExpanding:
      c.variant_rate = 6.67e-9;  // 6.67e-7 cm per step
      break;
  }
  return c;
}

int EnvConfig::substeps() const {
  return static_cast<int>(std::lround(dt_control / dt_physics));
}

int EnvConfig::state_dim() const { return variant == Variant::RStateSp ? 19 : 25; }

void EnvConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(episode_len >= 1, "episode_len must be >= 1");
  require(dt_physics > 0.0 && dt_control >= dt_physics, "invalid time steps");
  require(std::abs(substeps() * dt_physics - dt_control) < 1e-9,
          "dt_control must be an integer multiple of dt_physics");
  require(table_x_min < table_x_max && table_y_half > 0.0, "invalid table extents");
  require(floor_z < -constraint_height, "floor must lie below the table");
  require(target_x_min <= target_x_max && target_y_min <= target_y_max,
          "invalid target ranges");
  require(box_half_extent > 0.0 && box_mass > 0.0, "box size and mass must be > 0");
  require(gravity > 0.0, "gravity must be > 0");
  require(friction >= 0.0, "friction must be >= 0");
  require(restitution >= 0.0 && restitution < 1.0, "restitution must lie in [0, 1)");
  // A bounce is only energy-safe when the impact speed exceeds the velocity
  // gained from gravity during the penetrating substep.
  require(restitution_threshold >= gravity * dt_physics / (1.0 - restitution) - 1e-12,
          "restitution_threshold below g*dt/(1-e) allows energy gain on contact");
  require(box_stiffness > 0.0, "box_stiffness must be > 0");
  require(max_compression >= 0.0 && max_compression < 2.0 * box_half_extent,
          "max_compression must lie in [0, box size)");
  require(press_lever >= 0.0, "press_lever must be >= 0");
  require(finger_max_gap > 0.0 && finger_start_gap >= 0.0 && finger_start_gap <= finger_max_gap,
          "invalid finger gap limits");
  require(finger_speed > 0.0, "finger_speed must be > 0");
  require(finger_thickness > 0.0 && finger_width > 0.0 && finger_length > 0.0 &&
              palm_height > 0.0,
          "finger geometry must be positive");
  require(((gripper_workspace.hi - gripper_workspace.lo).array() >= 0.0).all(),
          "invalid gripper workspace");
  require(gripper_workspace.lo.z() >= 0.0, "gripper workspace must stay above the table");
  require(action_scale > 0.0, "action_scale must be > 0");
  require(success_tolerance > 0.0, "success_tolerance must be > 0");
  require(variant_rate >= 0.0, "variant_rate must be >= 0");
  if (constraint == Constraint::Wall || constraint == Constraint::Ditch) {
    require(constraint_width > 0.0 && constraint_height > 0.0, "invalid constraint size");
    require(constraint_x > table_x_min && constraint_x + constraint_width < table_x_max,
            "constraint must lie on the table");
  }
}

double box_energy(const SimState& s, const EnvConfig& cfg) {
  const double m = cfg.box_mass;
  const double kinetic = 0.5 * m * s.box_vel.squaredNorm() +
                         0.5 * box_inertia(cfg) * s.box_rotvel.squaredNorm();
  const double potential = m * cfg.gravity * (s.box_pos.z() - cfg.box_half_extent);
  const double elastic = 0.5 * cfg.box_stiffness * s.box_compression * s.box_compression;
  return kinetic + potential + elastic;
}

double support_height(const SimState& s, const EnvConfig& cfg) {
  return support_from(footprint(s, cfg), s.box_pos.head<2>(),
                      s.box_pos.z() - cfg.box_half_extent, world_columns(cfg), cfg.floor_z);
}

bool box_overlaps_obstacle(const SimState& s, const EnvConfig& cfg, double tol) {
  const double bottom = s.box_pos.z() - cfg.box_half_extent;
  if (bottom < cfg.floor_z - tol) return true;
  const Rect fp = footprint(s, cfg);
  for (const Column& c : world_columns(cfg)) {
    if (c.top <= bottom + tol) continue;
    if (overlap_1d(fp.x0, fp.x1, c.x0, c.x1) > tol && overlap_1d(fp.y0, fp.y1, c.y0, c.y1) > tol) {
      return true;
    }
  }
  return false;
}

Observation observe(const SimState& s, const EnvConfig& cfg) {
  Observation o;
  const bool reduced = cfg.variant == Variant::RStateSp;
  o.state.resize(reduced ? 19 : 25);
  Eigen::Index i = 0;
  const auto put = [&](const auto& v) {
    o.state.segment(i, v.size()) = v;
    i += v.size();
  };
  put(s.gripper_pos);
  put(s.box_pos);
  if (!reduced) put(s.box_rot);
  put(s.box_vel);
  if (!reduced) put(s.box_rotvel);
  put(Vector3d(s.box_pos - s.gripper_pos));
  put(s.finger_positions);
  put(s.gripper_vel);
  put(s.finger_velocities);
  o.achieved_goal = s.box_pos;
  o.desired_goal = s.target;
  return o;
}

ResetResult reset(const EnvConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-cfg.box_start_jitter, cfg.box_start_jitter);
  std::uniform_real_distribution<double> tx(cfg.target_x_min, cfg.target_x_max);
  std::uniform_real_distribution<double> ty(cfg.target_y_min, cfg.target_y_max);
  SimState s;
  s.gripper_pos = cfg.gripper_start;
  s.finger_positions = Vector2d::Constant(0.5 * cfg.finger_start_gap);
  s.finger_target_gap = cfg.finger_start_gap;
  const double jx = jitter(rng);
  const double jy = jitter(rng);
  s.box_pos = Vector3d(cfg.box_start.x() + jx, cfg.box_start.y() + jy, cfg.box_half_extent);
  const double gx = tx(rng);
  const double gy = ty(rng);
  s.target = Vector3d(gx, gy, cfg.box_half_extent);
  s.step_index = 0;
  return {s, observe(s, cfg)};
}

SimState integrate_physics(const SimState& state, const EnvConfig& cfg, double dt) {
  SimState s = state;
  const Columns cols = world_columns(cfg);
  const double h = cfg.box_half_extent;
  const double box_width = 2.0 * h;

  const double old_gap = s.finger_gap();
  const double gap_target = std::clamp(s.finger_target_gap, 0.0, cfg.finger_max_gap);
  const double max_move = cfg.finger_speed * dt;
  double gap = old_gap + std::clamp(gap_target - old_gap, -max_move, max_move);

  const Vector3d old_gripper = s.gripper_pos;
  s.gripper_pos = clamp_to(old_gripper + s.gripper_cmd_vel * dt, cfg.gripper_workspace);
  const Vector3d gripper_vel = (s.gripper_pos - old_gripper) / dt;

  const double bottom_start = s.box_pos.z() - h;
  const double energy_start = box_energy(s, cfg);

  if (s.grasped) {
    if (gap_target > box_width + 1e-4) {
      s.grasped = false;
    } else {
      gap = std::max(gap, box_width);
    }
  } else if (gap_target < box_width && gap <= box_width + 1e-4 && s.box_compression == 0.0 &&
             box_between_fingers(s, old_gap, cfg)) {
    s.grasped = true;
    gap = box_width;
    s.box_pos.y() = s.gripper_pos.y();
    s.grasp_offset = s.box_pos - s.gripper_pos;
    s.grasp_offset.y() = 0.0;
  }
  s.finger_velocities = Vector2d::Constant(0.5 * (gap - old_gap) / dt);
  s.finger_positions = Vector2d::Constant(0.5 * gap);

  if (s.grasped) {
    s.contact_this_step = true;
    s.box_pos = s.gripper_pos + s.grasp_offset;
    s.box_vel = gripper_vel;
    s.box_rotvel.setZero();
  } else {
    gripper_box_contact(s, gripper_vel, gap, cfg, cols);
  }
  const double energy_mid = box_energy(s, cfg);
  s.gripper_work += energy_mid - energy_start;

  const double prev_bottom = std::max(bottom_start, s.box_pos.z() - h);
  if (s.grasped) {
    const Vector3d correction = resolve_world(s, cfg, cols, prev_bottom, false);
    s.gripper_pos = clamp_to(s.gripper_pos + correction, cfg.gripper_workspace);
    s.grasp_offset = s.box_pos - s.gripper_pos;
    s.gripper_work += box_energy(s, cfg) - energy_mid;
    if (std::abs(s.grasp_offset.x()) > h ||
        overlap_1d(s.gripper_pos.z(), s.gripper_pos.z() + cfg.finger_length,
                   s.box_pos.z() - h, s.box_pos.z() + h) < 0.01) {
      s.grasped = false;
    }
  } else {
    s.box_vel.z() -= cfg.gravity * dt;
    s.box_pos += s.box_vel * dt;
    s.box_rot += s.box_rotvel * dt;
    resolve_world(s, cfg, cols, prev_bottom, true);

    // The gripper cannot pass through the box it is pushing.
    const Aabb box = box_aabb(s, cfg);
    bool any_overlap = false;
    for (const Aabb& part : gripper_parts(s.gripper_pos, gap, cfg)) {
      if (!overlaps(part, box)) continue;
      any_overlap = true;
      if (s.release_contact_suppressed) continue;
      const Vector3d pen = penetration(part, box);
      const int k = min_axis(pen);
      const double n = 0.5 * (box.lo[k] + box.hi[k]) >= 0.5 * (part.lo[k] + part.hi[k]) ? 1.0 : -1.0;
      s.gripper_pos[k] -= n * pen[k];
      // Inelastic stop against the gripper face.
      if (s.box_vel[k] * n < 0.0) s.box_vel[k] = 0.0;
    }
    s.gripper_pos = clamp_to(s.gripper_pos, cfg.gripper_workspace);
    if (s.release_contact_suppressed && !any_overlap) s.release_contact_suppressed = false;
  }
  return s;
}

StepResult step(const SimState& state, const Eigen::Vector4d& action, const EnvConfig& cfg) {
  if (state.step_index >= cfg.episode_len) {
    throw StateError("episode finished: step " + std::to_string(state.step_index) + " of " +
                     std::to_string(cfg.episode_len));
  }
  if (!action.allFinite()) throw NumericError("non-finite action");
  const Eigen::Vector4d a = action.cwiseMax(-1.0).cwiseMin(1.0);

  SimState s = state;
  const Vector3d start = s.gripper_pos;
  const Vector3d goal =
      clamp_to(start + a.head<3>() * cfg.action_scale, cfg.gripper_workspace);
  s.gripper_cmd_vel = (goal - start) / cfg.dt_control;
  s.finger_target_gap = 0.5 * (a[3] + 1.0) * cfg.finger_max_gap;
  s.contact_this_step = false;
  const int n = cfg.substeps();
  for (int i = 0; i < n; ++i) s = integrate_physics(s, cfg, cfg.dt_physics);
  s.gripper_vel = (s.gripper_pos - start) / cfg.dt_control;
  s.step_index += 1;

  StepResult r;
  r.obs = observe(s, cfg);
  r.reward = her::recompute_reward(s.box_pos, s.target, cfg.success_tolerance);
  r.info.is_success = r.reward == 0.0;
  r.info.grasped = s.grasped;
  const auto parts = gripper_parts(s.gripper_pos, s.finger_gap(), cfg);
  const Aabb box = box_aabb(s, cfg);
  bool touching = s.grasped;
  for (const Aabb& p : parts) touching = touching || overlaps(p, box, kContactTol);
  r.info.gripper_box_contact = s.contact_this_step || touching;
  r.info.box_airborne = s.box_pos.z() - cfg.box_half_extent > support_height(s, cfg) + kContactTol;
  r.state = std::move(s);
  return r;
}

namespace {

using Json = nlohmann::json;

const char* constraint_name(Constraint c) {
  switch (c) {
    case Constraint::None: return "none";
    case Constraint::Wall: return "wall";
    case Constraint::Ditch: return "ditch";
  }
  return "none";
}

Constraint constraint_from(const std::string& name) {
  if (name == "none") return Constraint::None;
  if (name == "wall") return Constraint::Wall;
  if (name == "ditch") return Constraint::Ditch;
  throw ConfigError("unknown constraint '" + name + "'");
}

template <int N>
Json vec_json(const Eigen::Matrix<double, N, 1>& v) {
  return std::vector<double>(v.data(), v.data() + N);
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const Json& j, const char* key) {
  const auto values = j.get<std::vector<double>>();
  if (values.size() != static_cast<std::size_t>(N)) {
    throw ConfigError(std::string(key) + ": expected " + std::to_string(N) + " numbers");
  }
  return Eigen::Map<const Eigen::Matrix<double, N, 1>>(values.data());
}

Json env_json(const EnvConfig& c) {
  return Json{{"variant", std::string(to_string(c.variant))},
              {"table_x_min", c.table_x_min},
              {"table_x_max", c.table_x_max},
              {"table_y_half", c.table_y_half},
              {"floor_z", c.floor_z},
              {"constraint", constraint_name(c.constraint)},
              {"constraint_x", c.constraint_x},
              {"constraint_width", c.constraint_width},
              {"constraint_height", c.constraint_height},
              {"target_x_min", c.target_x_min},
              {"target_x_max", c.target_x_max},
              {"target_y_min", c.target_y_min},
              {"target_y_max", c.target_y_max},
              {"variant_rate", c.variant_rate},
              {"episode_len", c.episode_len},
              {"dt_control", c.dt_control},
              {"dt_physics", c.dt_physics},
              {"workspace_min", vec_json<3>(c.gripper_workspace.lo)},
              {"workspace_max", vec_json<3>(c.gripper_workspace.hi)},
              {"gripper_start", vec_json<3>(c.gripper_start)},
              {"action_scale", c.action_scale},
              {"finger_max_gap", c.finger_max_gap},
              {"finger_start_gap", c.finger_start_gap},
              {"finger_speed", c.finger_speed},
              {"finger_thickness", c.finger_thickness},
              {"finger_width", c.finger_width},
              {"finger_length", c.finger_length},
              {"palm_height", c.palm_height},
              {"box_half_extent", c.box_half_extent},
              {"box_mass", c.box_mass},
              {"box_start", vec_json<2>(c.box_start)},
              {"box_start_jitter", c.box_start_jitter},
              {"gravity", c.gravity},
              {"friction", c.friction},
              {"restitution", c.restitution},
              {"restitution_threshold", c.restitution_threshold},
              {"box_stiffness", c.box_stiffness},
              {"max_compression", c.max_compression},
              {"press_lever", c.press_lever},
              {"success_tolerance", c.success_tolerance}};
}

}  // namespace

// Keys absent from the document keep the defaults of the named variant.
EnvConfig load_env_config(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("environment config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("environment config must be a JSON object");
  try {
    EnvConfig c = EnvConfig::for_variant(
        j.contains("variant") ? variant_from_string(j.at("variant").get<std::string>())
                              : Variant::Wall);
    const Json known = env_json(c);
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!known.contains(it.key())) throw ConfigError("unknown environment key '" + it.key() + "'");
    }
    const auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("table_x_min", c.table_x_min);
    get("table_x_max", c.table_x_max);
    get("table_y_half", c.table_y_half);
    get("floor_z", c.floor_z);
    if (j.contains("constraint")) c.constraint = constraint_from(j.at("constraint").get<std::string>());
    get("constraint_x", c.constraint_x);
    get("constraint_width", c.constraint_width);
    get("constraint_height", c.constraint_height);
    get("target_x_min", c.target_x_min);
    get("target_x_max", c.target_x_max);
    get("target_y_min", c.target_y_min);
    get("target_y_max", c.target_y_max);
    get("variant_rate", c.variant_rate);
    get("episode_len", c.episode_len);
    get("dt_control", c.dt_control);
    get("dt_physics", c.dt_physics);
    if (j.contains("workspace_min")) c.gripper_workspace.lo = vec_from<3>(j.at("workspace_min"), "workspace_min");
    if (j.contains("workspace_max")) c.gripper_workspace.hi = vec_from<3>(j.at("workspace_max"), "workspace_max");
    if (j.contains("gripper_start")) c.gripper_start = vec_from<3>(j.at("gripper_start"), "gripper_start");
    get("action_scale", c.action_scale);
    get("finger_max_gap", c.finger_max_gap);
    get("finger_start_gap", c.finger_start_gap);
    get("finger_speed", c.finger_speed);
    get("finger_thickness", c.finger_thickness);
    get("finger_width", c.finger_width);
    get("finger_length", c.finger_length);
    get("palm_height", c.palm_height);
    get("box_half_extent", c.box_half_extent);
    get("box_mass", c.box_mass);
    if (j.contains("box_start")) c.box_start = vec_from<2>(j.at("box_start"), "box_start");
    get("box_start_jitter", c.box_start_jitter);
    get("gravity", c.gravity);
    get("friction", c.friction);
    get("restitution", c.restitution);
    get("restitution_threshold", c.restitution_threshold);
    get("box_stiffness", c.box_stiffness);
    get("max_compression", c.max_compression);
    get("press_lever", c.press_lever);
    get("success_tolerance", c.success_tolerance);
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("environment config: ") + e.what());
  }
}

EnvConfig load_env_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open environment config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return load_env_config(text.str());
}

std::string to_json(const EnvConfig& cfg) { return env_json(cfg).dump(2); }

EnvConfig apply_variant_rule(const EnvConfig& cfg, std::int64_t global_step) {
  EnvConfig out = cfg;
  const double amount = cfg.variant_rate * static_cast<double>(global_step);
  switch (cfg.variant) {
    case Variant::TargetMoving:
      out.target_x_min += amount;
      out.target_x_max += amount;
      break;
    case Variant::TargetExpanding:
      out.target_x_max += amount;
      out.target_y_min -= amount;
      out.target_y_max += amount;
      break;
    default:
      break;
  }
  return out;
}

}  // namespace gcrl::sim
