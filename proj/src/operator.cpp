#include "scnav/operator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>

namespace scnav {

void OperatorPolicy::validate() const {
  if (!(decision_rate > 0.0) || !(frame_rate > 0.0)) throw ValidationError("operator: rates must be positive");
  if (noise_linear < 0.0 || noise_angular < 0.0) throw ValidationError("operator: noise must be >= 0");
  if (overcorrection < 0.0) throw ValidationError("operator: overcorrection must be >= 0");
  if (observation_delay < 0.0) throw ValidationError("operator: observation delay must be >= 0");
  if (!(gain >= 0.0) || !(capture_radius > 0.0)) throw ValidationError("operator: bad gain or capture radius");
  if (caution_distance < 0.0 || caution_speed < 0.0 || caution_speed > 1.0)
    throw ValidationError("operator: bad caution settings");
  if (!(cruise_speed > 0.0) || cruise_speed > 1.0) throw ValidationError("operator: cruise speed must be in (0, 1]");
  if (memory_range < 0.0) throw ValidationError("operator: memory range must be >= 0");
  if (route_clearance < 0.0) throw ValidationError("operator: route clearance must be >= 0");
  if (!(lookahead > 0.0)) throw ValidationError("operator: lookahead must be positive");
  if (stuck_window < 0.0 || stuck_distance < 0.0 || recovery_time < 0.0 || recovery_speed < 0.0 ||
      recovery_speed > 1.0)
    throw ValidationError("operator: bad recovery settings");
}

OperatorPolicy operator_preset(const std::string& name) {
  OperatorPolicy p;
  if (name == "teleop_like") {
    p.overcorrection = 0.5;
    p.noise_linear = 0.05;
    p.noise_angular = 0.05;
  } else if (name == "idealized") {
    p.overcorrection = 0.0;
  } else {
    throw ValidationError("unknown operator preset '" + name + "'");
  }
  return p;
}

ObservationBuffer::ObservationBuffer(double frame_rate, double delay) : period_(1.0 / frame_rate), delay_(delay) {
  if (!(frame_rate > 0.0)) throw ValidationError("observation buffer: frame rate must be positive");
}

void ObservationBuffer::offer(double now, const Pose2D& pose, const LaserScan& scan) {
  if (next_capture_ && now < *next_capture_ - 1e-9) return;
  frames_.push_back({now, pose, scan});
  next_capture_ = (next_capture_ ? *next_capture_ : now) + period_;
  // Keep only what a future latest() could still return.
  while (frames_.size() > 1 && frames_[1].stamp <= now - delay_ - period_) frames_.pop_front();
}

std::optional<Observation> ObservationBuffer::latest(double now) const {
  const double cutoff = now - delay_ + 1e-9;
  for (auto it = frames_.rbegin(); it != frames_.rend(); ++it)
    if (it->stamp <= cutoff) return *it;
  return std::nullopt;
}

RouteField::RouteField(const ArenaMap& prior, double inflation, double soft_clearance)
    : cols_(prior.walls.cols()),
      rows_(prior.walls.rows()),
      res_(prior.walls.resolution()),
      inflation_(inflation),
      soft_clearance_(soft_clearance),
      goal_(prior.goal),
      free_(inflated_free_space(prior, inflation)) {
  rebuild();
}

bool RouteField::block_disc(Vec2 p) {
  const int reach = static_cast<int>(std::ceil(inflation_ / res_)) + 1;
  const int cx = static_cast<int>(std::floor(p.x / res_));
  const int cy = static_cast<int>(std::floor(p.y / res_));
  bool changed = false;
  for (int iy = std::max(0, cy - reach); iy <= std::min(rows_ - 1, cy + reach); ++iy)
    for (int ix = std::max(0, cx - reach); ix <= std::min(cols_ - 1, cx + reach); ++ix) {
      const std::size_t i = index(ix, iy);
      if (!free_[i] || std::hypot((ix + 0.5) * res_ - p.x, (iy + 0.5) * res_ - p.y) >= inflation_) continue;
      free_[i] = 0;
      changed = true;
    }
  return changed;
}

void RouteField::rebuild() {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t n = free_.size();

  // Clearance from the inflated boundary, in cells (4-connected brushfire).
  std::vector<int> clear(n, -1);
  std::queue<std::pair<int, int>> q;
  for (int iy = 0; iy < rows_; ++iy)
    for (int ix = 0; ix < cols_; ++ix)
      if (!free_[index(ix, iy)]) {
        clear[index(ix, iy)] = 0;
        q.emplace(ix, iy);
      }
  constexpr int dx4[] = {1, -1, 0, 0};
  constexpr int dy4[] = {0, 0, 1, -1};
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop();
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx4[k], ny = y + dy4[k];
      if (nx < 0 || ny < 0 || nx >= cols_ || ny >= rows_ || clear[index(nx, ny)] >= 0) continue;
      clear[index(nx, ny)] = clear[index(x, y)] + 1;
      q.emplace(nx, ny);
    }
  }

  cost_.assign(n, kInf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  for (int iy = 0; iy < rows_; ++iy)
    for (int ix = 0; ix < cols_; ++ix) {
      const Vec2 c{(ix + 0.5) * res_, (iy + 0.5) * res_};
      if (free_[index(ix, iy)] && goal_.contains(c)) {
        cost_[index(ix, iy)] = 0.0;
        open.emplace(0.0, index(ix, iy));
      }
    }
  auto penalty = [&](std::size_t i) {
    if (!(soft_clearance_ > 0.0)) return 1.0;
    const double d = clear[i] < 0 ? soft_clearance_ : clear[i] * res_;
    return 1.0 + 3.0 * std::max(0.0, 1.0 - d / soft_clearance_);
  };
  constexpr int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  constexpr int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  while (!open.empty()) {
    const auto [c, i] = open.top();
    open.pop();
    if (c > cost_[i]) continue;
    const int x = static_cast<int>(i % cols_), y = static_cast<int>(i / cols_);
    for (int k = 0; k < 8; ++k) {
      const int nx = x + dx8[k], ny = y + dy8[k];
      if (nx < 0 || ny < 0 || nx >= cols_ || ny >= rows_) continue;
      const std::size_t j = index(nx, ny);
      if (!free_[j]) continue;
      // No corner cutting past blocked cells.
      if (k >= 4 && (!free_[index(nx, y)] || !free_[index(x, ny)])) continue;
      const double step = (k >= 4 ? std::sqrt(2.0) : 1.0) * res_ * penalty(j);
      if (c + step < cost_[j]) {
        cost_[j] = c + step;
        open.emplace(cost_[j], j);
      }
    }
  }
}

double RouteField::cost(Vec2 p) const {
  const int ix = static_cast<int>(std::floor(p.x / res_));
  const int iy = static_cast<int>(std::floor(p.y / res_));
  if (ix < 0 || iy < 0 || ix >= cols_ || iy >= rows_) return std::numeric_limits<double>::infinity();
  return cost_[index(ix, iy)];
}

std::optional<std::pair<int, int>> RouteField::nearest_reachable(int ix, int iy, int max_ring) const {
  for (int ring = 0; ring <= max_ring; ++ring) {
    std::optional<std::pair<int, int>> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int y = iy - ring; y <= iy + ring; ++y)
      for (int x = ix - ring; x <= ix + ring; ++x) {
        if (std::max(std::abs(x - ix), std::abs(y - iy)) != ring) continue;
        if (x < 0 || y < 0 || x >= cols_ || y >= rows_ || !std::isfinite(cost_[index(x, y)])) continue;
        const double d = std::hypot(x - ix, y - iy);
        if (d < best_d) {
          best_d = d;
          best = std::pair{x, y};
        }
      }
    if (best) return best;
  }
  return std::nullopt;
}

bool RouteField::visible(Vec2 a, Vec2 b) const {
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / (0.5 * res_))));
  for (int k = 0; k <= steps; ++k) {
    const Vec2 q = a + (static_cast<double>(k) / steps) * (b - a);
    if (!std::isfinite(cost(q))) return false;
  }
  return true;
}

Vec2 RouteField::lookahead(Vec2 p, double distance) const {
  const int ix = std::clamp(static_cast<int>(std::floor(p.x / res_)), 0, cols_ - 1);
  const int iy = std::clamp(static_cast<int>(std::floor(p.y / res_)), 0, rows_ - 1);
  const auto start = nearest_reachable(ix, iy, static_cast<int>(std::ceil(2.0 / res_)));
  if (!start) return goal_.center;
  auto [x, y] = *start;
  auto centre = [&](int cx, int cy) { return Vec2{(cx + 0.5) * res_, (cy + 0.5) * res_}; };
  const Vec2 from = std::isfinite(cost(p)) ? p : centre(x, y);
  Vec2 best_seen = centre(x, y);
  double travelled = 0.0;
  while (travelled < distance && cost_[index(x, y)] > 0.0) {
    int bx = x, by = y;
    double best = cost_[index(x, y)];
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= cols_ || ny >= rows_) continue;
        if (cost_[index(nx, ny)] < best) {
          best = cost_[index(nx, ny)];
          bx = nx;
          by = ny;
        }
      }
    if (bx == x && by == y) break;
    travelled += std::hypot(bx - x, by - y) * res_;
    x = bx;
    y = by;
    // Stop at the first point hidden behind an obstacle corner.
    if (!visible(from, centre(x, y))) break;
    best_seen = centre(x, y);
  }
  if (cost_[index(x, y)] == 0.0 && visible(from, goal_.center)) return goal_.center;
  return best_seen;
}

Twist operator_step(const OperatorPolicy& policy, std::size_t& waypoint, const RouteField* field,
                    const std::optional<Observation>& obs, double /*now*/, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  // Always draw both samples so the stream position depends only on the call count.
  const double n_lin = unit(rng);
  const double n_ang = unit(rng);
  if (!obs || (!field && policy.waypoints.empty())) return {};

  const Vec2 pos = obs->pose.position();
  Vec2 aim;
  if (field) {
    aim = field->lookahead(pos, policy.lookahead);
  } else {
    while (waypoint + 1 < policy.waypoints.size() &&
           (policy.waypoints[waypoint] - pos).norm() < policy.capture_radius)
      ++waypoint;
    aim = policy.waypoints[std::min(waypoint, policy.waypoints.size() - 1)];
  }
  const Vec2 to = aim - pos;
  const double err = wrap_angle(std::atan2(to.y, to.x) - obs->pose.theta);

  double angular = policy.gain * (1.0 + policy.overcorrection) * err;
  double linear = policy.cruise_speed * policy.v_max * std::max(0.0, std::cos(err));

  // Veer away from whatever the stale scan shows close ahead.
  const LaserScan& scan = obs->scan;
  double nearest = std::numeric_limits<double>::infinity();
  double left_clear = 0.0, right_clear = 0.0;
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const double a = wrap_angle(scan.beam_angle(i));
    if (std::abs(a) > policy.avoid_cone) continue;
    const double r = scan.ranges[i];
    nearest = std::min(nearest, r);
    (a >= 0.0 ? left_clear : right_clear) += r;
  }
  if (policy.caution_distance > policy.avoid_distance && nearest < policy.caution_distance) {
    const double f = std::clamp((nearest - policy.avoid_distance) / (policy.caution_distance - policy.avoid_distance), 0.0, 1.0);
    linear *= policy.caution_speed + (1.0 - policy.caution_speed) * f;
  }
  if (nearest < policy.avoid_distance) {
    const double urgency = 1.0 - nearest / policy.avoid_distance;
    const double side = left_clear >= right_clear ? 1.0 : -1.0;
    angular += side * policy.avoid_gain * policy.w_max * urgency;
    linear *= 1.0 - urgency;
  }

  linear += policy.noise_linear * n_lin;
  angular += policy.noise_angular * n_ang;
  return {std::clamp(linear, -policy.v_max, policy.v_max), std::clamp(angular, -policy.w_max, policy.w_max)};
}

ScriptedOperator::ScriptedOperator(OperatorPolicy policy, std::uint64_t seed, std::shared_ptr<const RouteField> field)
    : policy_(std::move(policy)), field_(std::move(field)), rng_(seed) {
  policy_.validate();
  if (field_ && policy_.memory_range > 0.0) memory_ = std::make_shared<RouteField>(*field_);
}

void ScriptedOperator::remember(const Observation& obs) {
  if (!memory_ || obs.stamp <= remembered_until_) return;
  remembered_until_ = obs.stamp;
  const LaserScan& scan = obs.scan;
  bool changed = false;
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const double r = scan.ranges[i];
    if (r >= scan.range_max || r > policy_.memory_range) continue;
    const double a = obs.pose.theta + scan.beam_angle(i);
    changed |= memory_->block_disc({obs.pose.x + r * std::cos(a), obs.pose.y + r * std::sin(a)});
  }
  if (changed) memory_->rebuild();
}

Twist ScriptedOperator::command(const std::optional<Observation>& observation, double now) {
  if (next_decision_ && now < *next_decision_ - 1e-9) return held_;
  next_decision_ = (next_decision_ ? *next_decision_ : now) + 1.0 / policy_.decision_rate;
  if (recovering(now)) {
    std::normal_distribution<double> unit(0.0, 1.0);
    unit(rng_);
    unit(rng_);
    held_ = recovery_cmd_;
    return held_;
  }
  if (observation && stuck(*observation)) {
    // Back away while turning toward the more open half of the last scan.
    double left = 0.0, right = 0.0;
    const LaserScan& scan = observation->scan;
    for (std::size_t i = 0; i < scan.ranges.size(); ++i)
      (wrap_angle(scan.beam_angle(i)) >= 0.0 ? left : right) += scan.ranges[i];
    recovery_cmd_ = {-policy_.recovery_speed * policy_.v_max, (left >= right ? 1.0 : -1.0) * policy_.w_max};
    recovery_until_ = now + policy_.recovery_time;
    seen_.clear();
    std::normal_distribution<double> unit(0.0, 1.0);
    unit(rng_);
    unit(rng_);
    held_ = recovery_cmd_;
    return held_;
  }
  if (observation) remember(*observation);
  held_ = operator_step(policy_, waypoint_, memory_ ? memory_.get() : field_.get(), observation, now, rng_);
  return held_;
}

bool ScriptedOperator::stuck(const Observation& obs) {
  if (!(policy_.stuck_window > 0.0)) return false;
  if (seen_.empty() || obs.stamp > seen_.back().first) seen_.emplace_back(obs.stamp, obs.pose.position());
  while (seen_.size() > 1 && seen_[1].first <= obs.stamp - policy_.stuck_window + 1e-9) seen_.pop_front();
  if (obs.stamp - seen_.front().first < policy_.stuck_window - 1e-9) return false;
  const Vec2 here = obs.pose.position();
  for (const auto& [stamp, p] : seen_)
    if ((p - here).norm() > policy_.stuck_distance) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Command traces

CommandTrace::CommandTrace(std::vector<TraceEntry> entries) {
  for (const auto& e : entries) append(e.stamp, e.cmd);
}

void CommandTrace::append(double stamp, const Twist& cmd) {
  if (!std::isfinite(stamp) || !std::isfinite(cmd.linear) || !std::isfinite(cmd.angular))
    throw ValidationError("trace: non-finite entry");
  if (!entries_.empty() && !(stamp > entries_.back().stamp))
    throw ValidationError("trace: timestamps must be strictly increasing");
  entries_.push_back({stamp, cmd});
}

void CommandTrace::record(double stamp, const Twist& cmd) {
  if (!entries_.empty() && entries_.back().cmd == cmd) return;
  append(stamp, cmd);
}

std::string CommandTrace::to_text() const {
  std::string out;
  char buf[96];
  for (const auto& e : entries_) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", e.stamp, e.cmd.linear, e.cmd.angular);
    out += buf;
  }
  return out;
}

CommandTrace CommandTrace::parse(const std::string& text) {
  CommandTrace trace;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    TraceEntry e;
    std::string extra;
    if (!(ls >> e.stamp >> e.cmd.linear >> e.cmd.angular) || (ls >> extra))
      throw ParseError(lineno, "", "expected 'timestamp linear angular'");
    try {
      trace.append(e.stamp, e.cmd);
    } catch (const ValidationError& err) {
      throw ParseError(lineno, "timestamp", err.what());
    }
  }
  return trace;
}

CommandTrace CommandTrace::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void CommandTrace::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file '" + path + "'");
  out << to_text();
}

Twist replay_step(const CommandTrace& trace, double now) {
  const auto& e = trace.entries();
  auto it = std::upper_bound(e.begin(), e.end(), now, [](double t, const TraceEntry& x) { return t < x.stamp; });
  if (it == e.begin()) return {};
  return std::prev(it)->cmd;
}

}  // namespace scnav
