#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "scnav/types.hpp"
#include "scnav/world.hpp"

namespace scnav {

/// d_max = sqrt(2) * (w_s - 1) / 2 * cell_size: distance from the window
/// centre cell to a corner cell centre.
double active_window_range(int window_cells, double cell_size);

/// Tunables of the goal-agnostic VFH+ pipeline. Sector k is centred on
/// the robot-frame angle k * alpha_res, measured counter-clockwise from the
/// robot's right-hand side, so straight ahead is 90 degrees.
struct VfhParams {
  double alpha_res = deg2rad(5.0);
  int window_cells = 60;
  double cell_size = 0.1;
  int c_max = 20;
  double a = 100.0;
  double tau_high = 0.25 * 20 * 20 * 100.0 * 0.3;
  double tau_low = 0.6 * (0.25 * 20 * 20 * 100.0 * 0.3);
  int s_max = 16;
  double mu1 = 5.0;  // target direction
  double mu2 = 2.0;  // current heading
  double mu3 = 2.0;  // previous steering direction
  double robot_radius = 0.4;
  double safety_factor = 1.10;
  double safety_distance = 0.1;
  double k_omega = 1.5;  // rad/s per rad of steering offset
  double goal_angle = deg2rad(90.0);

  int n_sectors() const;
  int target_sector() const;
  double d_max() const { return active_window_range(window_cells, cell_size); }
  double b() const;
  /// r_{r+s} = safety_factor * r_r + d_s
  double enlarged_radius() const { return safety_factor * robot_radius + safety_distance; }
  double sector_angle(int k) const { return static_cast<double>(k) * alpha_res; }
  /// Signed offset of sector k from straight ahead, in (-pi, pi].
  double sector_offset(int k) const { return wrap_angle(sector_angle(k) - kPi / 2.0); }
  int sector_of(double vfh_angle) const;
  int sector_distance(int a, int b) const;

  void validate() const;
};

/// Robot-centred, world-aligned certainty grid C_alpha.
class HistogramGrid {
 public:
  HistogramGrid(int window_cells, double cell_size, int c_max);

  int size() const { return size_; }
  double cell_size() const { return cell_size_; }
  int c_max() const { return c_max_; }
  int center_index() const { return size_ / 2; }
  const Pose2D& anchor_pose() const { return pose_; }

  int at(int i, int j) const { return cells_[static_cast<std::size_t>(j) * size_ + i]; }
  void set(int i, int j, int value);
  Vec2 cell_center(int i, int j) const;
  /// Window indices of the world point, if inside the window.
  std::optional<std::pair<int, int>> locate(Vec2 world) const;
  std::size_t nonzero_count() const;

  /// Moves the window so the robot sits in the centre cell. Content shifts by
  /// whole cells; cells entering the window start at zero.
  void recenter(const Pose2D& pose);
  /// Hit cells gain one unit of certainty per scan, cells crossed by a beam
  /// before its hit lose one.
  void update(const LaserScan& scan, const Pose2D& pose);

 private:
  int size_;
  double cell_size_;
  int c_max_;
  long origin_ix_ = 0;  // global cell index of window column 0
  long origin_iy_ = 0;
  bool anchored_ = false;
  Pose2D pose_;
  std::vector<std::int16_t> cells_;
};

HistogramGrid update_grid(HistogramGrid grid, const LaserScan& scan, const Pose2D& pose);

struct PrimaryPolarHistogram {
  std::vector<double> magnitudes;
};

/// Per-sector blocked flags; used for both the binary and masked stages.
struct SectorMask {
  std::vector<std::uint8_t> blocked;

  static SectorMask all_free(int n) { return {std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0)}; }
  int size() const { return static_cast<int>(blocked.size()); }
  bool is_blocked(int k) const { return blocked[static_cast<std::size_t>(k)] != 0; }
  int blocked_count() const;
  friend bool operator==(const SectorMask&, const SectorMask&) = default;
};

using BinaryPolarHistogram = SectorMask;
using MaskedPolarHistogram = SectorMask;

PrimaryPolarHistogram build_primary(const HistogramGrid& grid, const VfhParams& params);

BinaryPolarHistogram build_binary(const PrimaryPolarHistogram& primary, const BinaryPolarHistogram& previous,
                                  const VfhParams& params);

/// Adds turning-circle infeasibility. `max_turn_rate` sets the turning radius
/// v / w_max of the circles beside the robot.
MaskedPolarHistogram build_masked(const BinaryPolarHistogram& binary, const Twist& current_cmd,
                                  const HistogramGrid& grid, const VfhParams& params, double max_turn_rate);

enum class CandidateKind { NarrowCenter, WideRight, WideLeft, Target };

struct Candidate {
  int sector = 0;
  CandidateKind kind = CandidateKind::Target;
  double cost = 0.0;
};

/// A maximal run of free sectors, right border k_r to left border k_l
/// (k_l >= k_r, unwrapped; k_l may exceed n_sectors for a wrapping run).
struct Opening {
  int k_r = 0;
  int k_l = 0;
};

std::vector<Opening> find_openings(const MaskedPolarHistogram& masked);
std::vector<Candidate> find_candidates(const MaskedPolarHistogram& masked, const VfhParams& params);

/// g(c) = mu1*d(c, target) + mu2*d(c, heading) + mu3*d(c, previous).
double candidate_cost(int sector, int previous_direction, const VfhParams& params, int heading_sector);

std::optional<int> select_direction(std::vector<Candidate>& candidates, int previous_direction,
                                    const VfhParams& params, std::optional<int> heading_sector = std::nullopt);

Twist direction_to_twist(std::optional<int> k_d, const MaskedPolarHistogram& masked, const VfhParams& params,
                         const RobotSpec& spec);

struct VfhFrame {
  PrimaryPolarHistogram primary;
  BinaryPolarHistogram binary;
  MaskedPolarHistogram masked;
  std::vector<Candidate> candidates;
  std::optional<int> selected;
  int previous_direction = 0;
  Twist command;  // U_r
};

/// One control loop's VFH+ state: grid, binary hysteresis memory and the
/// previously chosen direction.
class VfhPlanner {
 public:
  VfhPlanner(VfhParams params, RobotSpec robot);

  const VfhParams& params() const { return params_; }
  const HistogramGrid& grid() const { return grid_; }

  VfhFrame update(const LaserScan& scan, const Pose2D& pose, const Twist& last_command);
  void reset();

 private:
  VfhParams params_;
  RobotSpec robot_;
  HistogramGrid grid_;
  BinaryPolarHistogram binary_;
  std::optional<double> previous_heading_world_;
};

}  // namespace scnav
