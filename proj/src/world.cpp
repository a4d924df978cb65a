#include "scnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scnav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinRange = 1e-9;

bool point_in_polygon(Vec2 p, const ConvexPolygon& poly) {
  const auto& v = poly.vertices;
  if (v.size() < 3) return false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i];
    const Vec2 b = v[(i + 1) % v.size()];
    if ((b - a).cross(p - a) < 0.0) return false;
  }
  return true;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.dot(ab);
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double distance_to_obstacle(Vec2 p, const Obstacle& obs) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle>) {
          return std::max(0.0, (p - s.center).norm() - s.radius);
        } else {
          if (point_in_polygon(p, s)) return 0.0;
          double best = kInf;
          const auto& v = s.vertices;
          for (std::size_t i = 0; i < v.size(); ++i)
            best = std::min(best, point_segment_distance(p, v[i], v[(i + 1) % v.size()]));
          return best;
        }
      },
      obs.shape);
}

bool point_in_obstacle(Vec2 p, const Obstacle& obs) {
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle>) {
          return (p - s.center).norm() < s.radius;
        } else {
          return point_in_polygon(p, s);
        }
      },
      obs.shape);
}

// Smallest t >= 0 with origin + t*dir on the obstacle boundary (0 if inside).
double ray_obstacle(Vec2 o, Vec2 dir, const Obstacle& obs) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Circle>) {
          const Vec2 oc = o - s.center;
          const double b = oc.dot(dir);
          const double c = oc.dot(oc) - s.radius * s.radius;
          if (c <= 0.0) return 0.0;
          const double disc = b * b - c;
          if (disc < 0.0) return kInf;
          const double t = -b - std::sqrt(disc);
          return t >= 0.0 ? t : kInf;
        } else {
          if (point_in_polygon(o, s)) return 0.0;
          double best = kInf;
          const auto& v = s.vertices;
          for (std::size_t i = 0; i < v.size(); ++i) {
            const Vec2 a = v[i];
            const Vec2 e = v[(i + 1) % v.size()] - a;
            const double denom = dir.cross(e);
            if (std::abs(denom) < 1e-15) continue;
            const Vec2 ao = a - o;
            const double t = ao.cross(e) / denom;
            const double u = ao.cross(dir) / denom;
            if (t >= 0.0 && u >= 0.0 && u <= 1.0) best = std::min(best, t);
          }
          return best;
        }
      },
      obs.shape);
}

// Distance along the ray to the first occupied wall cell (grid traversal).
double ray_grid(Vec2 o, Vec2 dir, const OccupancyGrid& grid, double max_range) {
  const double res = grid.resolution();
  int ix = static_cast<int>(std::floor(o.x / res));
  int iy = static_cast<int>(std::floor(o.y / res));
  if (grid.occupied(ix, iy)) return 0.0;

  const int step_x = dir.x > 0.0 ? 1 : (dir.x < 0.0 ? -1 : 0);
  const int step_y = dir.y > 0.0 ? 1 : (dir.y < 0.0 ? -1 : 0);
  double t_max_x = kInf, t_max_y = kInf, t_delta_x = kInf, t_delta_y = kInf;
  if (step_x != 0) {
    const double boundary = (ix + (step_x > 0 ? 1 : 0)) * res;
    t_max_x = (boundary - o.x) / dir.x;
    t_delta_x = res / std::abs(dir.x);
  }
  if (step_y != 0) {
    const double boundary = (iy + (step_y > 0 ? 1 : 0)) * res;
    t_max_y = (boundary - o.y) / dir.y;
    t_delta_y = res / std::abs(dir.y);
  }
  while (true) {
    double t;
    if (t_max_x < t_max_y) {
      t = t_max_x;
      ix += step_x;
      t_max_x += t_delta_x;
    } else {
      t = t_max_y;
      iy += step_y;
      t_max_y += t_delta_y;
    }
    if (t > max_range) return kInf;
    if (grid.occupied(ix, iy)) return std::max(t, 0.0);
  }
}

}  // namespace

void RobotSpec::validate() const {
  if (!(effective_radius > 0.0) || effective_radius > footprint_radius)
    throw ValidationError("robot: require 0 < effective_radius <= footprint_radius");
  if (!(v_max > 0.0) || !(w_max > 0.0)) throw ValidationError("robot: speed limits must be positive");
}

Twist clamp_twist(const Twist& cmd, const RobotSpec& spec) {
  return {std::clamp(cmd.linear, -spec.v_max, spec.v_max), std::clamp(cmd.angular, -spec.w_max, spec.w_max)};
}

std::size_t SensorSpec::beam_count() const {
  return static_cast<std::size_t>(std::floor((angle_max - angle_min) / angle_increment + 1e-9)) + 1;
}

void SensorSpec::validate() const {
  if (!(angle_increment > 0.0) || angle_max < angle_min) throw ValidationError("sensor: bad angular layout");
  if (!(range_max > 0.0)) throw ValidationError("sensor: range_max must be positive");
}

OccupancyGrid::OccupancyGrid(double width, double height, double resolution)
    : resolution_(resolution), width_(width), height_(height) {
  if (!(width > 0.0) || !(height > 0.0)) throw ValidationError("arena: width and height must be positive");
  if (!(resolution > 0.0)) throw ValidationError("arena: resolution must be positive");
  const double fc = width / resolution;
  const double fr = height / resolution;
  cols_ = static_cast<int>(std::lround(fc));
  rows_ = static_cast<int>(std::lround(fr));
  if (std::abs(fc - cols_) > 1e-6 || std::abs(fr - rows_) > 1e-6)
    throw ValidationError("arena: width and height must be multiples of the resolution");
  cells_.assign(static_cast<std::size_t>(cols_) * rows_, 0);
}

void OccupancyGrid::set(int ix, int iy, bool occ) {
  if (!in_bounds(ix, iy)) return;
  cells_[static_cast<std::size_t>(iy) * cols_ + ix] = occ ? 1 : 0;
}

void OccupancyGrid::fill_rect(const WallRect& r) {
  const double x0 = std::min(r.x0, r.x1), x1 = std::max(r.x0, r.x1);
  const double y0 = std::min(r.y0, r.y1), y1 = std::max(r.y0, r.y1);
  // A cell is filled when its centre lies inside the rectangle.
  const int cx0 = static_cast<int>(std::ceil(x0 / resolution_ - 0.5 - 1e-9));
  const int cx1 = static_cast<int>(std::floor(x1 / resolution_ - 0.5 + 1e-9));
  const int cy0 = static_cast<int>(std::ceil(y0 / resolution_ - 0.5 - 1e-9));
  const int cy1 = static_cast<int>(std::floor(y1 / resolution_ - 0.5 + 1e-9));
  for (int iy = cy0; iy <= cy1; ++iy)
    for (int ix = cx0; ix <= cx1; ++ix) set(ix, iy, true);
}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

namespace {

bool point_free(Vec2 p, const ArenaMap& map) {
  if (!map.contains(p)) return false;
  const double res = map.walls.resolution();
  if (map.walls.occupied(static_cast<int>(std::floor(p.x / res)), static_cast<int>(std::floor(p.y / res))))
    return false;
  return std::none_of(map.obstacles.begin(), map.obstacles.end(),
                      [&](const Obstacle& o) { return point_in_obstacle(p, o); });
}

}  // namespace

ArenaMap make_arena(double width, double height, double resolution, std::vector<WallRect> walls,
                    std::vector<Obstacle> obstacles, Pose2D start, GoalRegion goal, std::vector<Vec2> route) {
  ArenaMap map;
  map.width = width;
  map.height = height;
  map.walls = OccupancyGrid(width, height, resolution);
  for (const auto& w : walls) map.walls.fill_rect(w);
  map.wall_rects = std::move(walls);
  map.obstacles = std::move(obstacles);
  start.theta = wrap_angle(start.theta);
  map.start = start;
  map.goal = goal;
  map.route = std::move(route);
  if (!point_free(start.position(), map)) throw ValidationError("arena: start pose is not in free space");
  if (!(goal.radius > 0.0)) throw ValidationError("arena: goal radius must be positive");
  if (!point_free(goal.center, map)) throw ValidationError("arena: goal region is not in free space");
  return map;
}

void validate_arena(const ArenaMap& map, const RobotSpec& spec) {
  if (disc_collides(map.start.position(), spec.footprint_radius, map))
    throw ValidationError("arena: robot footprint at the start pose overlaps an obstacle");
}

double clearance(Vec2 p, const ArenaMap& map, double search_radius) {
  double best = std::min({search_radius, p.x, p.y, map.width - p.x, map.height - p.y});
  best = std::max(best, 0.0);
  const double res = map.walls.resolution();
  const int x0 = static_cast<int>(std::floor((p.x - best) / res));
  const int x1 = static_cast<int>(std::floor((p.x + best) / res));
  const int y0 = static_cast<int>(std::floor((p.y - best) / res));
  const int y1 = static_cast<int>(std::floor((p.y + best) / res));
  for (int iy = std::max(y0, 0); iy <= std::min(y1, map.walls.rows() - 1); ++iy) {
    for (int ix = std::max(x0, 0); ix <= std::min(x1, map.walls.cols() - 1); ++ix) {
      if (!map.walls.occupied(ix, iy)) continue;
      const double cx = std::clamp(p.x, ix * res, (ix + 1) * res);
      const double cy = std::clamp(p.y, iy * res, (iy + 1) * res);
      best = std::min(best, std::hypot(p.x - cx, p.y - cy));
    }
  }
  for (const auto& o : map.obstacles) best = std::min(best, distance_to_obstacle(p, o));
  return best;
}

double obstacle_distance(Vec2 p, const Obstacle& obstacle) { return distance_to_obstacle(p, obstacle); }

bool disc_collides(Vec2 c, double radius, const ArenaMap& map) {
  return clearance(c, map, radius + 1.0) < radius;
}

double raycast(Vec2 origin, double angle, const ArenaMap& map, double range_max) {
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  double best = ray_grid(origin, dir, map.walls, range_max);
  for (const auto& o : map.obstacles) best = std::min(best, ray_obstacle(origin, dir, o));
  return std::clamp(best, kMinRange, range_max);
}

LaserScan raycast_scan(const Pose2D& pose, const ArenaMap& map, const SensorSpec& sensor) {
  if (!map.contains(pose.position())) throw ValidationError("raycast: pose outside arena bounds");
  LaserScan scan;
  scan.angle_min = sensor.angle_min;
  scan.angle_max = sensor.angle_max;
  scan.angle_increment = sensor.angle_increment;
  scan.range_max = sensor.range_max;
  const std::size_t n = sensor.beam_count();
  scan.ranges.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    scan.ranges[i] = raycast(pose.position(), pose.theta + scan.beam_angle(i), map, sensor.range_max);
  return scan;
}

Pose2D step_dynamics(const Pose2D& pose, const Twist& cmd, double dt) {
  return {pose.x + cmd.linear * std::cos(pose.theta) * dt, pose.y + cmd.linear * std::sin(pose.theta) * dt,
          wrap_angle(pose.theta + cmd.angular * dt)};
}

bool check_collision(const Pose2D& pose, const ArenaMap& map, const RobotSpec& spec) {
  return disc_collides(pose.position(), spec.footprint_radius, map);
}

DelayedChannel::DelayedChannel(double delay) : delay_(delay) {
  if (!(delay >= 0.0)) throw ValidationError("channel: delay must be non-negative");
}

void DelayedChannel::push(double stamp, const Twist& cmd) {
  if (last_stamp_ && stamp < *last_stamp_) throw StateError("channel: out-of-order timestamp");
  last_stamp_ = stamp;
  queue_.emplace_back(stamp, cmd);
}

Twist DelayedChannel::sample(double now) {
  if (last_stamp_ && now < *last_stamp_) throw StateError("channel: sample time precedes last push");
  // Tick times are k*dt products, so allow one rounding error at the window edge.
  const double cutoff = now - delay_ + 1e-9;
  std::size_t newest = queue_.size();
  for (std::size_t i = 0; i < queue_.size() && queue_[i].first <= cutoff; ++i) newest = i;
  if (newest == queue_.size()) return {};
  queue_.erase(queue_.begin(), queue_.begin() + static_cast<std::ptrdiff_t>(newest));
  return queue_.front().second;
}

void DelayedChannel::clear() {
  queue_.clear();
  last_stamp_.reset();
}

Twist delayed_sample(DelayedChannel& channel, std::optional<std::pair<double, Twist>> push, double now) {
  if (push) channel.push(push->first, push->second);
  return channel.sample(now);
}

World::World(ArenaMap map, RobotSpec robot, SensorSpec sensor, double dt)
    : map_(std::move(map)),
      robot_(robot),
      sensor_(sensor),
      dt_(dt),
      pose_(map_.start),
      contact_free_time_(std::numeric_limits<double>::infinity()) {
  if (!(dt > 0.0)) throw ValidationError("world: dt must be positive");
  robot_.validate();
  sensor_.validate();
}

StepOutcome World::step(const Twist& cmd) {
  StepOutcome out;
  out.applied = clamp_twist(cmd, robot_);
  const Pose2D proposed = step_dynamics(pose_, out.applied, dt_);
  const double r = robot_.footprint_radius;
  Pose2D next = proposed;
  if (disc_collides(proposed.position(), r, map_)) {
    out.contact = true;
    // Slide: keep whichever axis component does not penetrate.
    if (!disc_collides({proposed.x, pose_.y}, r, map_)) {
      next.y = pose_.y;
    } else if (!disc_collides({pose_.x, proposed.y}, r, map_)) {
      next.x = pose_.x;
    } else {
      next.x = pose_.x;
      next.y = pose_.y;
    }
  }
  if (out.contact) {
    if (contact_free_time_ >= kCollisionDebounce - 1e-9) {
      ++collisions_;
      out.new_collision = true;
    }
    contact_free_time_ = 0.0;
  } else {
    contact_free_time_ += dt_;
  }
  path_length_ += std::hypot(next.x - pose_.x, next.y - pose_.y);
  pose_ = next;
  ++tick_;
  out.pose = pose_;
  return out;
}

std::vector<std::uint8_t> inflated_free_space(const ArenaMap& map, double inflation) {
  const OccupancyGrid& g = map.walls;
  const int cols = g.cols(), rows = g.rows();
  const double res = g.resolution();
  std::vector<std::uint8_t> free(static_cast<std::size_t>(cols) * rows, 1);
  auto center = [&](int ix, int iy) { return Vec2{(ix + 0.5) * res, (iy + 0.5) * res}; };
  auto block = [&](int ix, int iy) { free[static_cast<std::size_t>(iy) * cols + ix] = 0; };

  for (int iy = 0; iy < rows; ++iy) {
    for (int ix = 0; ix < cols; ++ix) {
      const Vec2 c = center(ix, iy);
      if (std::min({c.x, c.y, map.width - c.x, map.height - c.y}) < inflation) block(ix, iy);
    }
  }
  const int reach = static_cast<int>(std::ceil(inflation / res)) + 1;
  for (int wy = 0; wy < rows; ++wy) {
    for (int wx = 0; wx < cols; ++wx) {
      if (!g.occupied(wx, wy)) continue;
      for (int iy = std::max(0, wy - reach); iy <= std::min(rows - 1, wy + reach); ++iy) {
        for (int ix = std::max(0, wx - reach); ix <= std::min(cols - 1, wx + reach); ++ix) {
          const Vec2 c = center(ix, iy);
          const double nx = std::clamp(c.x, wx * res, (wx + 1) * res);
          const double ny = std::clamp(c.y, wy * res, (wy + 1) * res);
          if (std::hypot(c.x - nx, c.y - ny) < inflation) block(ix, iy);
        }
      }
    }
  }
  for (const auto& o : map.obstacles) {
    double x0, y0, x1, y1;
    if (const auto* c = std::get_if<Circle>(&o.shape)) {
      x0 = c->center.x - c->radius;
      x1 = c->center.x + c->radius;
      y0 = c->center.y - c->radius;
      y1 = c->center.y + c->radius;
    } else {
      const auto& v = std::get<ConvexPolygon>(o.shape).vertices;
      x0 = y0 = std::numeric_limits<double>::infinity();
      x1 = y1 = -x0;
      for (const auto& p : v) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
    }
    const int ix0 = std::max(0, static_cast<int>(std::floor((x0 - inflation) / res)));
    const int ix1 = std::min(cols - 1, static_cast<int>(std::floor((x1 + inflation) / res)));
    const int iy0 = std::max(0, static_cast<int>(std::floor((y0 - inflation) / res)));
    const int iy1 = std::min(rows - 1, static_cast<int>(std::floor((y1 + inflation) / res)));
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix)
        if (obstacle_distance(center(ix, iy), o) < inflation) block(ix, iy);
  }
  return free;
}

}  // namespace scnav
