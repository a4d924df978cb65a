#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "scnav/types.hpp"
#include "scnav/world.hpp"

namespace scnav {

/// Parameters of the scripted waypoint-seeking operator.
struct OperatorPolicy {
  std::vector<Vec2> waypoints;
  double gain = 0.4;               // rad/s per rad of bearing error
  double cruise_speed = 1.0;       // fraction of v_max when unobstructed
  double overcorrection = 0.0;     // extra fraction of the correction
  double noise_linear = 0.0;       // std-dev, m/s
  double noise_angular = 0.0;      // std-dev, rad/s
  double observation_delay = 1.4;  // s
  double frame_rate = 2.5;         // Hz, observation capture rate
  double decision_rate = 2.5;      // Hz
  double capture_radius = 1.0;     // m
  // Reaction to obstacles seen in the (stale) scan.
  double avoid_distance = 1.2;     // m, inside the front cone
  double avoid_cone = deg2rad(35.0);
  double avoid_gain = 1.0;         // fraction of w_max at zero range
  double caution_distance = 0.0;   // m, slow down below this range; 0 disables
  double caution_speed = 0.25;     // fraction of v_max at the avoid distance
  // Recovery when the observed pose stops changing.
  double stuck_window = 4.0;       // s of observations
  double stuck_distance = 0.25;    // m
  double recovery_time = 2.0;      // s
  double recovery_speed = 0.25;    // reverse speed, fraction of v_max
  // Map guidance: steer at a point this far along the cost-to-goal descent.
  double lookahead = 1.5;          // m
  double route_clearance = 1.0;    // m, paths closer than this to obstacles cost more
  double memory_range = 0.0;       // m, scan hits this close join the route map; 0 disables
  double v_max = 0.8;
  double w_max = 1.0;

  void validate() const;
};

/// Named presets. "teleop_like" models an operator working through delayed,
/// throttled feedback; "idealized" is noise- and overshoot-free.
OperatorPolicy operator_preset(const std::string& name);

/// A camera/map frame as the operator sees it.
struct Observation {
  double stamp = 0.0;
  Pose2D pose;
  LaserScan scan;
};

/// Captures frames at the policy's frame rate and releases each one only
/// after the observation delay has passed.
class ObservationBuffer {
 public:
  ObservationBuffer(double frame_rate, double delay);

  /// Offers the current world state; stored only on capture instants.
  void offer(double now, const Pose2D& pose, const LaserScan& scan);
  /// Latest frame with stamp <= now - delay.
  std::optional<Observation> latest(double now) const;

 private:
  double period_;
  double delay_;
  std::optional<double> next_capture_;
  std::deque<Observation> frames_;
};

/// Cost-to-goal over the operator's prior map (static walls and visible
/// obstacles). Cells a disc of `inflation` cannot occupy are excluded; cells
/// within `soft_clearance` of an obstacle cost more so paths keep off walls.
class RouteField {
 public:
  RouteField(const ArenaMap& prior, double inflation, double soft_clearance = 1.0);

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  double resolution() const { return res_; }
  /// Infinite outside the reachable set.
  double cost(Vec2 p) const;
  double cell_cost(int ix, int iy) const { return cost_[index(ix, iy)]; }
  /// Point up to `distance` metres down the steepest descent from p, cut
  /// short where the straight line from p would leave the reachable set.
  /// Starts from the nearest reachable cell when p itself is not reachable;
  /// returns the goal centre when nothing is reachable nearby.
  Vec2 lookahead(Vec2 p, double distance) const;
  /// True when the segment a-b stays inside the reachable set.
  bool visible(Vec2 a, Vec2 b) const;

  /// Marks an obstacle point; true when any cell became blocked. Call
  /// rebuild() afterwards to refresh costs.
  bool block_disc(Vec2 p);
  void rebuild();

 private:
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * cols_ + ix; }
  std::optional<std::pair<int, int>> nearest_reachable(int ix, int iy, int max_ring) const;

  int cols_ = 0;
  int rows_ = 0;
  double res_ = 0.1;
  double inflation_ = 0.0;
  double soft_clearance_ = 0.0;
  GoalRegion goal_;
  std::vector<std::uint8_t> free_;
  std::vector<double> cost_;
};

/// Computes one fresh operator decision from a stale observation. With a
/// route field the operator steers at its look-ahead point; otherwise it
/// follows the waypoint list, advancing `waypoint` when the observed pose is
/// within the capture radius.
Twist operator_step(const OperatorPolicy& policy, std::size_t& waypoint, const RouteField* field,
                    const std::optional<Observation>& observation, double now, std::mt19937_64& rng);

/// Stateful wrapper: decides at decision_rate and holds the command between
/// decisions.
class ScriptedOperator {
 public:
  ScriptedOperator(OperatorPolicy policy, std::uint64_t seed, std::shared_ptr<const RouteField> field = nullptr);

  Twist command(const std::optional<Observation>& observation, double now);
  std::size_t waypoint_index() const { return waypoint_; }
  const OperatorPolicy& policy() const { return policy_; }
  bool recovering(double now) const { return recovery_until_ && now < *recovery_until_ - 1e-9; }

 private:
  bool stuck(const Observation& obs);
  void remember(const Observation& obs);

  OperatorPolicy policy_;
  std::shared_ptr<const RouteField> field_;
  std::shared_ptr<RouteField> memory_;  // field_ plus obstacles seen so far
  double remembered_until_ = -1.0;
  std::mt19937_64 rng_;
  std::size_t waypoint_ = 0;
  std::optional<double> next_decision_;
  Twist held_;
  std::deque<std::pair<double, Vec2>> seen_;  // observed positions by stamp
  std::optional<double> recovery_until_;
  Twist recovery_cmd_;
};

struct TraceEntry {
  double stamp = 0.0;
  Twist cmd;
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

/// Time-stamped command record. Text form: one "timestamp linear angular"
/// line per entry, '#' starts a comment line.
class CommandTrace {
 public:
  CommandTrace() = default;
  explicit CommandTrace(std::vector<TraceEntry> entries);

  const std::vector<TraceEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  /// Appends; the stamp must be strictly greater than the last one.
  void append(double stamp, const Twist& cmd);
  /// Appends only if cmd differs from the last recorded command.
  void record(double stamp, const Twist& cmd);

  std::string to_text() const;
  static CommandTrace parse(const std::string& text);
  static CommandTrace load(const std::string& path);
  void save(const std::string& path) const;

  friend bool operator==(const CommandTrace&, const CommandTrace&) = default;

 private:
  std::vector<TraceEntry> entries_;
};

/// Zero-order hold of the most recent command at or before now.
Twist replay_step(const CommandTrace& trace, double now);

}  // namespace scnav
