#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scnav/blend.hpp"
#include "scnav/config.hpp"
#include "scnav/operator.hpp"
#include "scnav/stats.hpp"
#include "scnav/vfh.hpp"
#include "scnav/world.hpp"

namespace scnav {

/// 4-connected search over inflated free space from start to goal centre.
bool route_exists(const ArenaMap& map, double inflation);

/// Adds `params.count` hidden circular obstacles. Placement is seeded and
/// keeps an inflated corridor between start and goal; throws StateError
/// when no feasible placement is found within the retry budget.
ArenaMap place_random_obstacles(const ArenaMap& map, const ObstacleGenParams& params, std::uint64_t seed,
                                double inflation);

struct TickRecord {
  double time = 0.0;
  Twist issued;  // operator command entering the link
  Twist u_h;     // after the delay
  Twist u_r;
  Twist u_f;
  bool new_collision = false;
};

enum class TrialStatus { Running, Completed, TimedOut };

std::string_view to_string(TrialStatus s);

/// One shared-control loop: delayed link, VFH+ planner, arbitration and world.
class Simulation {
 public:
  /// `world_map` already contains any random obstacles.
  Simulation(const TrialConfig& config, ArenaMap world_map, ArbitrationConfig arbitration);

  const World& world() const { return world_; }
  const VfhPlanner& planner() const { return planner_; }
  const Arbitrator& arbitrator() const { return arbitrator_; }
  void configure(ControlMode mode, std::optional<double> alpha = std::nullopt);

  double time() const { return world_.time(); }
  TrialStatus status() const { return status_; }
  /// Scan of the current state (what the sensor sees before this tick).
  const LaserScan& scan() const { return scan_; }
  const VfhFrame& last_frame() const { return frame_; }
  const TickRecord& last_tick() const { return last_; }
  double completion_time() const { return completion_time_; }

  /// Advances one control period with `issued` as the operator's command at
  /// the current time.
  const TickRecord& tick(const Twist& issued);

 private:
  TrialConfig config_;
  World world_;
  VfhPlanner planner_;
  Arbitrator arbitrator_;
  DelayedChannel channel_;
  LaserScan scan_;
  VfhFrame frame_;
  TickRecord last_;
  Twist last_applied_;
  TrialStatus status_ = TrialStatus::Running;
  double completion_time_ = 0.0;
};

struct TrialMetrics {
  std::uint64_t seed = 0;
  ControlMode mode = ControlMode::Shared;
  double completion_time = 0.0;  // equals the timeout when timed out
  bool timed_out = false;
  int collisions = 0;
  double path_length = 0.0;

  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

struct TrialOptions {
  std::optional<std::uint64_t> seed;
  std::optional<ControlMode> mode;
  std::optional<double> alpha;
  const CommandTrace* replay = nullptr;   // replaces the scripted operator
  CommandTrace* record_issued = nullptr;  // receives the issued commands
};

/// Everything the loop needs that derives from the seed.
ArenaMap trial_world(const TrialConfig& config, std::uint64_t seed);
std::uint64_t operator_seed(std::uint64_t trial_seed);

TrialMetrics run_trial(const TrialConfig& config, const TrialOptions& options = {});

struct GroupSummary {
  std::size_t n = 0;
  double time_mean = 0.0, time_sd = 0.0;
  double collisions_mean = 0.0, collisions_sd = 0.0;
  int collisions_total = 0;
  int timeouts = 0;
};

struct Summary {
  GroupSummary teleop;
  GroupSummary shared;
  /// (teleop - shared) / shared, percent: how much faster shared control is.
  double time_faster_pct = 0.0;
  /// (teleop - shared) / teleop, percent: share of collisions removed.
  double collision_reduction_pct = 0.0;
  /// teleop / shared collision means; infinite when shared is zero.
  double collision_ratio = 0.0;
};

GroupSummary summarize_group(const std::vector<TrialMetrics>& group);
/// Throws ValidationError when either group is empty.
Summary summarize(const std::vector<TrialMetrics>& teleop, const std::vector<TrialMetrics>& shared);
Summary summarize_means(double teleop_time, double shared_time, double teleop_collisions, double shared_collisions);

struct BatchOptions {
  int repetitions = 4;  // paired seeds
  std::uint64_t base_seed = 1;
  bool run_teleop = true;
  bool run_shared = true;
  std::optional<double> alpha;
};

struct BatchReport {
  std::vector<TrialMetrics> rows;  // ordered by (seed, mode)
  std::optional<Summary> summary;
  std::optional<StatsResult> time_test;
  std::optional<StatsResult> collision_test;
  std::vector<std::string> warnings;
  std::string csv;
  std::string summary_text;
};

std::string csv_header();
std::string csv_row(const std::string& config_hash, const TrialMetrics& m);

/// Paired experiment: every seed runs in both modes, alternating which mode
/// goes first.
BatchReport run_batch(const TrialConfig& config, const BatchOptions& options);

}  // namespace scnav
