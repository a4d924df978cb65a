#include "scnav/vfh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace scnav {

namespace {

constexpr double kAngleEps = 1e-9;

int mod(int a, int n) {
  const int r = a % n;
  return r < 0 ? r + n : r;
}

// Visits every global cell crossed by the segment from `from` to `to`, in
// order, excluding the cell that contains `to`.
template <typename Visit>
void trace_cells(Vec2 from, Vec2 to, double cell, Visit&& visit) {
  long ix = static_cast<long>(std::floor(from.x / cell));
  long iy = static_cast<long>(std::floor(from.y / cell));
  const long ex = static_cast<long>(std::floor(to.x / cell));
  const long ey = static_cast<long>(std::floor(to.y / cell));
  const Vec2 d = to - from;
  const int sx = d.x > 0 ? 1 : (d.x < 0 ? -1 : 0);
  const int sy = d.y > 0 ? 1 : (d.y < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  double tmx = inf, tmy = inf, tdx = inf, tdy = inf;
  if (sx != 0) {
    tmx = ((ix + (sx > 0 ? 1 : 0)) * cell - from.x) / d.x;
    tdx = cell / std::abs(d.x);
  }
  if (sy != 0) {
    tmy = ((iy + (sy > 0 ? 1 : 0)) * cell - from.y) / d.y;
    tdy = cell / std::abs(d.y);
  }
  // Bound the walk: the Manhattan cell distance plus slack for rounding.
  long budget = std::labs(ex - ix) + std::labs(ey - iy) + 2;
  while ((ix != ex || iy != ey) && budget-- > 0) {
    visit(ix, iy);
    if (tmx < tmy) {
      ix += sx;
      tmx += tdx;
    } else {
      iy += sy;
      tmy += tdy;
    }
  }
}

}  // namespace

double active_window_range(int window_cells, double cell_size) {
  if (window_cells < 2 || !(cell_size > 0.0)) throw ValidationError("active window needs at least 2 cells of positive size");
  return std::sqrt(2.0) * static_cast<double>(window_cells - 1) / 2.0 * cell_size;
}

int VfhParams::n_sectors() const { return static_cast<int>(std::lround(kTwoPi / alpha_res)); }

int VfhParams::target_sector() const { return sector_of(goal_angle); }

double VfhParams::b() const {
  const double d = d_max();
  return a / (d * d);
}

int VfhParams::sector_of(double vfh_angle) const {
  return mod(static_cast<int>(std::lround(vfh_angle / alpha_res)), n_sectors());
}

int VfhParams::sector_distance(int x, int y) const {
  const int n = n_sectors();
  const int d = std::abs(mod(x, n) - mod(y, n));
  return std::min(d, n - d);
}

void VfhParams::validate() const {
  if (!(alpha_res > 0.0)) throw ValidationError("vfh: alpha_res must be positive");
  const int n = n_sectors();
  if (std::abs(n * alpha_res - kTwoPi) > 1e-9) throw ValidationError("vfh: alpha_res must divide 360 degrees");
  if (window_cells < 3) throw ValidationError("vfh: window_cells must be >= 3");
  if (!(cell_size > 0.0)) throw ValidationError("vfh: cell_size must be positive");
  if (c_max < 1) throw ValidationError("vfh: c_max must be >= 1");
  if (!(a > 0.0)) throw ValidationError("vfh: a must be positive");
  if (!(tau_low < tau_high)) throw ValidationError("vfh: require tau_low < tau_high");
  if (s_max < 1 || 2 * s_max >= n) throw ValidationError("vfh: require 1 <= s_max < n_sectors / 2");
  if (!(mu1 > mu2 + mu3) || mu2 < 0.0 || mu3 < 0.0) throw ValidationError("vfh: require mu1 > mu2 + mu3 >= 0");
  if (!(robot_radius > 0.0) || !(safety_factor > 0.0) || safety_distance < 0.0)
    throw ValidationError("vfh: bad enlargement radius parameters");
  if (!(k_omega > 0.0)) throw ValidationError("vfh: k_omega must be positive");
}

// ---------------------------------------------------------------------------
// Certainty grid

HistogramGrid::HistogramGrid(int window_cells, double cell_size, int c_max)
    : size_(window_cells), cell_size_(cell_size), c_max_(c_max) {
  if (window_cells < 3) throw ValidationError("grid: window_cells must be >= 3");
  if (!(cell_size > 0.0)) throw ValidationError("grid: cell_size must be positive");
  if (c_max < 1 || c_max > 32767) throw ValidationError("grid: c_max out of range");
  cells_.assign(static_cast<std::size_t>(size_) * size_, 0);
}

void HistogramGrid::set(int i, int j, int value) {
  cells_[static_cast<std::size_t>(j) * size_ + i] = static_cast<std::int16_t>(std::clamp(value, 0, c_max_));
}

Vec2 HistogramGrid::cell_center(int i, int j) const {
  return {(static_cast<double>(origin_ix_ + i) + 0.5) * cell_size_,
          (static_cast<double>(origin_iy_ + j) + 0.5) * cell_size_};
}

std::optional<std::pair<int, int>> HistogramGrid::locate(Vec2 world) const {
  const long gx = static_cast<long>(std::floor(world.x / cell_size_));
  const long gy = static_cast<long>(std::floor(world.y / cell_size_));
  const long i = gx - origin_ix_;
  const long j = gy - origin_iy_;
  if (i < 0 || j < 0 || i >= size_ || j >= size_) return std::nullopt;
  return std::pair<int, int>{static_cast<int>(i), static_cast<int>(j)};
}

std::size_t HistogramGrid::nonzero_count() const {
  return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](auto c) { return c != 0; }));
}

void HistogramGrid::recenter(const Pose2D& pose) {
  const long new_ix = static_cast<long>(std::floor(pose.x / cell_size_)) - center_index();
  const long new_iy = static_cast<long>(std::floor(pose.y / cell_size_)) - center_index();
  pose_ = pose;
  if (!anchored_) {
    origin_ix_ = new_ix;
    origin_iy_ = new_iy;
    anchored_ = true;
    return;
  }
  const long dx = new_ix - origin_ix_;
  const long dy = new_iy - origin_iy_;
  if (dx == 0 && dy == 0) return;
  std::vector<std::int16_t> shifted(cells_.size(), 0);
  for (int j = 0; j < size_; ++j) {
    const long sj = j + dy;
    if (sj < 0 || sj >= size_) continue;
    for (int i = 0; i < size_; ++i) {
      const long si = i + dx;
      if (si < 0 || si >= size_) continue;
      shifted[static_cast<std::size_t>(j) * size_ + i] = cells_[static_cast<std::size_t>(sj) * size_ + si];
    }
  }
  cells_ = std::move(shifted);
  origin_ix_ = new_ix;
  origin_iy_ = new_iy;
}

void HistogramGrid::update(const LaserScan& scan, const Pose2D& pose) {
  recenter(pose);
  // 0 = untouched, 1 = crossed, 2 = hit. Hits take precedence within a scan.
  std::vector<std::uint8_t> mark(cells_.size(), 0);
  const Vec2 origin = pose.position();
  auto mark_cell = [&](long gx, long gy, std::uint8_t m) {
    const long i = gx - origin_ix_;
    const long j = gy - origin_iy_;
    if (i < 0 || j < 0 || i >= size_ || j >= size_) return;
    auto& slot = mark[static_cast<std::size_t>(j) * size_ + static_cast<std::size_t>(i)];
    slot = std::max(slot, m);
  };
  for (std::size_t b = 0; b < scan.ranges.size(); ++b) {
    const double r = scan.ranges[b];
    const double ang = pose.theta + scan.beam_angle(b);
    const Vec2 dir{std::cos(ang), std::sin(ang)};
    const bool hit = r < scan.range_max;
    // Nudge past the surface so the end point lands inside the struck cell.
    const Vec2 end = origin + (r + 1e-6) * dir;
    trace_cells(origin, end, cell_size_, [&](long gx, long gy) { mark_cell(gx, gy, 1); });
    mark_cell(static_cast<long>(std::floor(end.x / cell_size_)), static_cast<long>(std::floor(end.y / cell_size_)),
              hit ? 2 : 1);
  }
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    if (mark[k] == 2) {
      cells_[k] = static_cast<std::int16_t>(std::min<int>(cells_[k] + 1, c_max_));
    } else if (mark[k] == 1) {
      cells_[k] = static_cast<std::int16_t>(std::max<int>(cells_[k] - 1, 0));
    }
  }
}

HistogramGrid update_grid(HistogramGrid grid, const LaserScan& scan, const Pose2D& pose) {
  grid.update(scan, pose);
  return grid;
}

// ---------------------------------------------------------------------------
// Polar histograms

int SectorMask::blocked_count() const {
  return static_cast<int>(std::count_if(blocked.begin(), blocked.end(), [](auto b) { return b != 0; }));
}

PrimaryPolarHistogram build_primary(const HistogramGrid& grid, const VfhParams& params) {
  const int n = params.n_sectors();
  PrimaryPolarHistogram out{std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  const Pose2D& pose = grid.anchor_pose();
  const double d_max = params.d_max();
  const double d_max2 = d_max * d_max;
  const double r_enl = params.enlarged_radius();
  for (int j = 0; j < grid.size(); ++j) {
    for (int i = 0; i < grid.size(); ++i) {
      const int c = grid.at(i, j);
      if (c == 0) continue;
      const Vec2 rel = grid.cell_center(i, j) - pose.position();
      const double d = rel.norm();
      if (d >= d_max) continue;
      // m = c^2 (a - b d^2) with b = a / d_max^2.
      const double m = static_cast<double>(c) * c * params.a * (1.0 - (d * d) / d_max2);
      if (m <= 0.0) continue;
      const double gamma = d <= r_enl ? kPi / 2.0 : std::asin(r_enl / d);
      const double beta = wrap_angle(std::atan2(rel.y, rel.x) - pose.theta) + kPi / 2.0;
      const int k_lo = static_cast<int>(std::ceil((beta - gamma) / params.alpha_res - kAngleEps));
      const int k_hi = static_cast<int>(std::floor((beta + gamma) / params.alpha_res + kAngleEps));
      for (int k = k_lo; k <= k_hi && k - k_lo < n; ++k) out.magnitudes[static_cast<std::size_t>(mod(k, n))] += m;
    }
  }
  return out;
}

BinaryPolarHistogram build_binary(const PrimaryPolarHistogram& primary, const BinaryPolarHistogram& previous,
                                  const VfhParams& params) {
  const std::size_t n = primary.magnitudes.size();
  if (previous.blocked.size() != n) throw ValidationError("binary histogram: length mismatch");
  BinaryPolarHistogram out = previous;
  for (std::size_t k = 0; k < n; ++k) {
    const double m = primary.magnitudes[k];
    if (m > params.tau_high) {
      out.blocked[k] = 1;
    } else if (m < params.tau_low) {
      out.blocked[k] = 0;
    }
  }
  return out;
}

MaskedPolarHistogram build_masked(const BinaryPolarHistogram& binary, const Twist& current_cmd,
                                  const HistogramGrid& grid, const VfhParams& params, double max_turn_rate) {
  const int n = params.n_sectors();
  if (binary.size() != n) throw ValidationError("masked histogram: length mismatch");
  MaskedPolarHistogram out = binary;
  if (!(current_cmd.linear > 0.0) || !(max_turn_rate > 0.0)) return out;

  const double turn_radius = current_cmd.linear / max_turn_rate;
  const double reach = turn_radius + params.enlarged_radius();
  const double reach2 = reach * reach;
  const Pose2D& pose = grid.anchor_pose();
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  const double d_max = params.d_max();

  // Offsets from straight ahead; positive is left.
  double phi_left = kPi;
  double phi_right = -kPi;
  bool left_limited = false, right_limited = false;
  for (int j = 0; j < grid.size(); ++j) {
    for (int i = 0; i < grid.size(); ++i) {
      if (grid.at(i, j) == 0) continue;
      const Vec2 w = grid.cell_center(i, j) - pose.position();
      if (w.norm() >= d_max) continue;
      // Robot frame: x forward, y left. Turning centres at (0, +R) and (0, -R).
      const double px = c * w.x + s * w.y;
      const double py = -s * w.x + c * w.y;
      const double offset = std::atan2(py, px);
      if (offset >= 0.0) {
        const double dy = py - turn_radius;
        if (px * px + dy * dy < reach2 && offset < phi_left) {
          phi_left = offset;
          left_limited = true;
        }
      } else {
        const double dy = py + turn_radius;
        if (px * px + dy * dy < reach2 && offset > phi_right) {
          phi_right = offset;
          right_limited = true;
        }
      }
    }
  }
  if (!left_limited && !right_limited) return out;
  for (int k = 0; k < n; ++k) {
    const double o = params.sector_offset(k);
    bool masked = false;
    if (left_limited && o > phi_left + kAngleEps) masked = true;
    if (right_limited && o < phi_right - kAngleEps) masked = true;
    // Directly behind lies beyond either limit.
    if (o >= kPi - kAngleEps && (left_limited || right_limited)) masked = true;
    if (masked) out.blocked[static_cast<std::size_t>(k)] = 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Candidates and selection

std::vector<Opening> find_openings(const MaskedPolarHistogram& masked) {
  const int n = masked.size();
  std::vector<Opening> out;
  int first_blocked = -1;
  for (int k = 0; k < n; ++k) {
    if (masked.is_blocked(k)) {
      first_blocked = k;
      break;
    }
  }
  if (first_blocked < 0) return out;  // no borders: handled by the caller
  // Scan one full turn starting just after a blocked sector.
  int run_start = -1;
  for (int step = 1; step <= n; ++step) {
    const int k = first_blocked + step;
    const bool blocked = masked.is_blocked(mod(k, n));
    if (!blocked && run_start < 0) run_start = k;
    if (blocked && run_start >= 0) {
      Opening o{mod(run_start, n), 0};
      o.k_l = o.k_r + (k - 1 - run_start);
      out.push_back(o);
      run_start = -1;
    }
  }
  return out;
}

namespace {

// Resolves a half-integer sector toward the target; whole values pass through.
int round_toward_target(double value, const VfhParams& params) {
  const int n = params.n_sectors();
  const double lo = std::floor(value);
  if (value - lo < 0.25) return mod(static_cast<int>(lo), n);
  if (value - lo > 0.75) return mod(static_cast<int>(lo) + 1, n);
  const int a = mod(static_cast<int>(lo), n);
  const int b = mod(static_cast<int>(lo) + 1, n);
  const int t = params.target_sector();
  return params.sector_distance(b, t) < params.sector_distance(a, t) ? b : a;
}

void add_unique(std::vector<Candidate>& out, Candidate c) {
  for (auto& existing : out) {
    if (existing.sector == c.sector) {
      if (c.kind == CandidateKind::Target) existing.kind = CandidateKind::Target;
      return;
    }
  }
  out.push_back(c);
}

}  // namespace

std::vector<Candidate> find_candidates(const MaskedPolarHistogram& masked, const VfhParams& params) {
  const int n = params.n_sectors();
  if (masked.size() != n) throw ValidationError("candidates: histogram length mismatch");
  std::vector<Candidate> out;
  const int blocked = masked.blocked_count();
  if (blocked == n) return out;
  const int target = params.target_sector();
  if (blocked == 0) {
    out.push_back({target, CandidateKind::Target, 0.0});
    return out;
  }
  for (const Opening& o : find_openings(masked)) {
    const int width = o.k_l - o.k_r;
    if (width < params.s_max) {
      add_unique(out, {round_toward_target((o.k_r + o.k_l) / 2.0, params), CandidateKind::NarrowCenter, 0.0});
      continue;
    }
    const double c_r = o.k_r + params.s_max / 2.0;
    const double c_l = o.k_l - params.s_max / 2.0;
    add_unique(out, {round_toward_target(c_r, params), CandidateKind::WideRight, 0.0});
    add_unique(out, {round_toward_target(c_l, params), CandidateKind::WideLeft, 0.0});
    for (int shift : {0, n, -n, 2 * n}) {
      const int kt = target + shift;
      if (kt >= c_r && kt <= c_l) {
        add_unique(out, {target, CandidateKind::Target, 0.0});
        break;
      }
    }
  }
  return out;
}

double candidate_cost(int sector, int previous_direction, const VfhParams& params, int heading_sector) {
  return params.mu1 * params.sector_distance(sector, params.target_sector()) +
         params.mu2 * params.sector_distance(sector, heading_sector) +
         params.mu3 * params.sector_distance(sector, previous_direction);
}

std::optional<int> select_direction(std::vector<Candidate>& candidates, int previous_direction,
                                    const VfhParams& params, std::optional<int> heading_sector) {
  if (candidates.empty()) return std::nullopt;
  const int heading = heading_sector.value_or(params.target_sector());
  const int target = params.target_sector();
  for (auto& c : candidates) c.cost = candidate_cost(c.sector, previous_direction, params, heading);
  const Candidate* best = &candidates.front();
  auto key = [&](const Candidate& c) {
    return std::tuple{c.cost, params.sector_distance(c.sector, target),
                      params.sector_distance(c.sector, previous_direction), c.sector};
  };
  for (const auto& c : candidates)
    if (key(c) < key(*best)) best = &c;
  return best->sector;
}

Twist direction_to_twist(std::optional<int> k_d, const MaskedPolarHistogram& masked, const VfhParams& params,
                         const RobotSpec& spec) {
  if (!k_d) return {};
  const double offset = params.sector_offset(*k_d);
  int front = 0, front_blocked = 0;
  for (int k = 0; k < masked.size(); ++k) {
    if (std::abs(params.sector_offset(k)) <= kPi / 2.0 + kAngleEps) {
      ++front;
      if (masked.is_blocked(k)) ++front_blocked;
    }
  }
  const double clear = front > 0 ? 1.0 - static_cast<double>(front_blocked) / front : 1.0;
  Twist out;
  out.angular = std::clamp(params.k_omega * offset, -spec.w_max, spec.w_max);
  out.linear = spec.v_max * std::max(0.0, std::cos(offset)) * clear;
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

VfhPlanner::VfhPlanner(VfhParams params, RobotSpec robot)
    : params_(params),
      robot_(robot),
      grid_(params.window_cells, params.cell_size, params.c_max),
      binary_(SectorMask::all_free(params.n_sectors())) {
  params_.validate();
}

void VfhPlanner::reset() {
  grid_ = HistogramGrid(params_.window_cells, params_.cell_size, params_.c_max);
  binary_ = SectorMask::all_free(params_.n_sectors());
  previous_heading_world_.reset();
}

VfhFrame VfhPlanner::update(const LaserScan& scan, const Pose2D& pose, const Twist& last_command) {
  grid_.update(scan, pose);
  VfhFrame f;
  f.primary = build_primary(grid_, params_);
  binary_ = build_binary(f.primary, binary_, params_);
  f.binary = binary_;
  f.masked = build_masked(f.binary, last_command, grid_, params_, robot_.w_max);
  f.candidates = find_candidates(f.masked, params_);
  f.previous_direction = previous_heading_world_
                             ? params_.sector_of(wrap_angle(*previous_heading_world_ - pose.theta) + kPi / 2.0)
                             : params_.target_sector();
  f.selected = select_direction(f.candidates, f.previous_direction, params_);
  if (f.selected) previous_heading_world_ = wrap_angle(pose.theta + params_.sector_offset(*f.selected));
  f.command = direction_to_twist(f.selected, f.masked, params_, robot_);
  return f;
}

}  // namespace scnav
