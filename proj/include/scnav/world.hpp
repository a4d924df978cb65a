#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scnav/types.hpp"

namespace scnav {

struct RobotSpec {
  double effective_radius = 0.4;   // r_r used by the avoidance layer
  double v_max = 0.8;
  double w_max = 1.0;
  double footprint_radius = 0.53;  // physical disc used for collisions

  void validate() const;
};

Twist clamp_twist(const Twist& cmd, const RobotSpec& spec);

struct SensorSpec {
  double angle_min = -kPi;
  double angle_max = kPi - deg2rad(1.0);
  double angle_increment = deg2rad(1.0);
  double range_max = 5.0;

  std::size_t beam_count() const;
  void validate() const;
};

struct LaserScan {
  double angle_min = 0.0;
  double angle_max = 0.0;
  double angle_increment = 0.0;
  double range_max = 0.0;
  std::vector<double> ranges;

  double beam_angle(std::size_t i) const {
    return angle_min + static_cast<double>(i) * angle_increment;
  }
};

struct Circle {
  Vec2 center;
  double radius = 0.0;
};

/// Convex polygon, vertices in counter-clockwise order.
struct ConvexPolygon {
  std::vector<Vec2> vertices;
};

struct Obstacle {
  std::variant<Circle, ConvexPolygon> shape;
  // Hidden obstacles exist in the world but not in the prior map handed
  // to the operator and UI.
  bool hidden = false;
};

/// Axis-aligned wall rectangle, rasterized into the static grid.
struct WallRect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

struct GoalRegion {
  Vec2 center;
  double radius = 0.5;

  bool contains(Vec2 p) const { return (p - center).norm() <= radius; }
};

/// Static occupancy raster. Cells outside the grid read as occupied, so the
/// arena boundary behaves like a wall.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(double width, double height, double resolution);

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  double resolution() const { return resolution_; }
  double width() const { return width_; }
  double height() const { return height_; }

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < cols_ && iy < rows_; }
  bool occupied(int ix, int iy) const {
    return !in_bounds(ix, iy) || cells_[static_cast<std::size_t>(iy) * cols_ + ix] != 0;
  }
  void set(int ix, int iy, bool occ);
  void fill_rect(const WallRect& r);
  std::size_t occupied_count() const;

 private:
  int cols_ = 0;
  int rows_ = 0;
  double resolution_ = 0.1;
  double width_ = 0.0;
  double height_ = 0.0;
  std::vector<std::uint8_t> cells_;
};

struct ArenaMap {
  double width = 0.0;
  double height = 0.0;
  OccupancyGrid walls;
  std::vector<WallRect> wall_rects;
  std::vector<Obstacle> obstacles;
  GoalRegion goal;
  Pose2D start;
  std::vector<Vec2> route;  // operator waypoints, ending near the goal

  bool contains(Vec2 p) const { return p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height; }
};

/// Builds and validates an arena from its parts. Throws ValidationError if
/// the start pose or the goal region is not in free space.
ArenaMap make_arena(double width, double height, double resolution, std::vector<WallRect> walls,
                    std::vector<Obstacle> obstacles, Pose2D start, GoalRegion goal,
                    std::vector<Vec2> route = {});

void validate_arena(const ArenaMap& map, const RobotSpec& spec);

/// Distance from p to the nearest wall cell, boundary or obstacle, saturated
/// at search_radius.
double clearance(Vec2 p, const ArenaMap& map, double search_radius);

/// Distance from p to the obstacle's boundary; 0 when inside.
double obstacle_distance(Vec2 p, const Obstacle& obstacle);

bool disc_collides(Vec2 center, double radius, const ArenaMap& map);

/// Cells of the arena raster whose centre keeps at least `inflation` metres
/// from every wall, boundary and obstacle, i.e. where a disc of that radius fits.
std::vector<std::uint8_t> inflated_free_space(const ArenaMap& map, double inflation);

LaserScan raycast_scan(const Pose2D& pose, const ArenaMap& map, const SensorSpec& sensor);

/// Single beam range, capped at range_max.
double raycast(Vec2 origin, double angle, const ArenaMap& map, double range_max);

/// Unicycle integration; callers clamp the command first.
Pose2D step_dynamics(const Pose2D& pose, const Twist& cmd, double dt);

bool check_collision(const Pose2D& pose, const ArenaMap& map, const RobotSpec& spec);

/// Command link with a fixed transport delay. A sample at time t returns the
/// newest entry stamped at or before t - delay.
class DelayedChannel {
 public:
  explicit DelayedChannel(double delay = 0.0);

  double delay() const { return delay_; }
  void push(double stamp, const Twist& cmd);
  Twist sample(double now);
  std::size_t pending() const { return queue_.size(); }
  void clear();

 private:
  double delay_;
  std::deque<std::pair<double, Twist>> queue_;
  std::optional<double> last_stamp_;
};

Twist delayed_sample(DelayedChannel& channel, std::optional<std::pair<double, Twist>> push, double now);

struct StepOutcome {
  Pose2D pose;
  Twist applied;
  bool contact = false;        // the commanded motion would have penetrated
  bool new_collision = false;  // a debounced collision episode started
};

/// Fixed-step world: kinematics, sliding contact and debounced collision
/// counting.
class World {
 public:
  static constexpr double kCollisionDebounce = 0.5;

  World(ArenaMap map, RobotSpec robot, SensorSpec sensor, double dt);

  const ArenaMap& map() const { return map_; }
  const RobotSpec& robot() const { return robot_; }
  const SensorSpec& sensor() const { return sensor_; }
  const Pose2D& pose() const { return pose_; }
  double dt() const { return dt_; }
  std::uint64_t tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * dt_; }
  int collisions() const { return collisions_; }
  double path_length() const { return path_length_; }
  bool in_goal() const { return map_.goal.contains(pose_.position()); }

  LaserScan scan() const { return raycast_scan(pose_, map_, sensor_); }
  StepOutcome step(const Twist& cmd);

 private:
  ArenaMap map_;
  RobotSpec robot_;
  SensorSpec sensor_;
  double dt_;
  Pose2D pose_;
  std::uint64_t tick_ = 0;
  int collisions_ = 0;
  double contact_free_time_;
  double path_length_ = 0.0;
};

}  // namespace scnav
