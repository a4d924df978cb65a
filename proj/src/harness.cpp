#include "scnav/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <queue>
#include <random>

namespace scnav {

namespace {
// Extra margin the scripted operator keeps from mapped walls when planning.
constexpr double kOperatorMargin = 0.1;
}  // namespace

// ---------------------------------------------------------------------------
// Free space and obstacle placement

bool route_exists(const ArenaMap& map, double inflation) {
  const auto free = inflated_free_space(map, inflation);
  const int cols = map.walls.cols(), rows = map.walls.rows();
  const double res = map.walls.resolution();
  auto index = [&](int ix, int iy) { return static_cast<std::size_t>(iy) * cols + ix; };
  const int sx = std::clamp(static_cast<int>(map.start.x / res), 0, cols - 1);
  const int sy = std::clamp(static_cast<int>(map.start.y / res), 0, rows - 1);
  std::vector<std::uint8_t> seen(free.size(), 0);
  std::queue<std::pair<int, int>> q;
  q.emplace(sx, sy);
  seen[index(sx, sy)] = 1;
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop();
    const Vec2 c{(x + 0.5) * res, (y + 0.5) * res};
    if (map.goal.contains(c)) return true;
    constexpr int dx[] = {1, -1, 0, 0};
    constexpr int dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= cols || ny >= rows) continue;
      const auto i = index(nx, ny);
      if (seen[i] || !free[i]) continue;
      seen[i] = 1;
      q.emplace(nx, ny);
    }
  }
  return false;
}

namespace {

// Start pose followed by the waypoint route.
std::vector<Vec2> route_polyline(const ArenaMap& map) {
  std::vector<Vec2> pts{map.start.position()};
  for (const auto& p : map.route) pts.push_back(p);
  if ((pts.back() - map.goal.center).norm() > 1e-9) pts.push_back(map.goal.center);
  return pts;
}

Vec2 sample_near_route(const std::vector<Vec2>& pts, double spread, std::mt19937_64& rng) {
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) cum.push_back(cum.back() + (pts[i] - pts[i - 1]).norm());
  std::uniform_real_distribution<double> along(0.0, cum.back());
  std::uniform_real_distribution<double> side(-spread, spread);
  const double s = along(rng);
  const double lateral = side(rng);
  std::size_t seg = 1;
  while (seg + 1 < pts.size() && cum[seg] < s) ++seg;
  const Vec2 a = pts[seg - 1], b = pts[seg];
  const double len = (b - a).norm();
  const Vec2 dir = len > 0.0 ? (1.0 / len) * (b - a) : Vec2{1.0, 0.0};
  const double u = len > 0.0 ? (s - cum[seg - 1]) : 0.0;
  return a + u * dir + lateral * Vec2{-dir.y, dir.x};
}

}  // namespace

ArenaMap place_random_obstacles(const ArenaMap& map, const ObstacleGenParams& params, std::uint64_t seed,
                                double inflation) {
  if (params.count < 0) throw ValidationError("obstacles: count must be >= 0");
  ArenaMap out = map;
  if (params.count == 0) return out;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x0b57ac1eU};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> radius(params.radius_min, params.radius_max);
  std::uniform_real_distribution<double> ux(0.0, map.width), uy(0.0, map.height);
  const auto pts = route_polyline(map);
  const bool along_route = params.route_spread > 0.0 && pts.size() >= 2;

  for (int placed = 0; placed < params.count; ++placed) {
    bool ok = false;
    for (int attempt = 0; attempt < params.max_retries && !ok; ++attempt) {
      const double r = radius(rng);
      const Vec2 c = along_route ? sample_near_route(pts, params.route_spread, rng) : Vec2{ux(rng), uy(rng)};
      if (!out.contains(c)) continue;
      if ((c - map.start.position()).norm() < params.keep_clear + r) continue;
      if ((c - map.goal.center).norm() < params.keep_clear + map.goal.radius + r) continue;
      if (clearance(c, out, r + 0.3) < r + 0.3) continue;
      out.obstacles.push_back({Circle{c, r}, true});
      if (route_exists(out, inflation)) {
        ok = true;
      } else {
        out.obstacles.pop_back();
      }
    }
    if (!ok) throw StateError("obstacles: no feasible placement after " + std::to_string(params.max_retries) + " retries");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Control loop

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::Running: return "running";
    case TrialStatus::Completed: return "completed";
    case TrialStatus::TimedOut: return "timeout";
  }
  return "unknown";
}

Simulation::Simulation(const TrialConfig& config, ArenaMap world_map, ArbitrationConfig arbitration)
    : config_(config),
      world_(std::move(world_map), config.robot, config.sensor, config.dt),
      planner_(config.vfh, config.robot),
      arbitrator_(arbitration),
      channel_(config.command_delay),
      scan_(world_.scan()) {
  frame_.binary = frame_.masked = SectorMask::all_free(config.vfh.n_sectors());
  frame_.primary.magnitudes.assign(static_cast<std::size_t>(config.vfh.n_sectors()), 0.0);
  if (world_.in_goal()) {
    status_ = TrialStatus::Completed;
  }
}

void Simulation::configure(ControlMode mode, std::optional<double> alpha) { arbitrator_.configure(mode, alpha); }

const TickRecord& Simulation::tick(const Twist& issued) {
  if (status_ != TrialStatus::Running) return last_;
  const double t = world_.time();
  TickRecord rec;
  rec.time = t;
  rec.issued = issued;
  channel_.push(t, issued);
  rec.u_h = channel_.sample(t);
  frame_ = planner_.update(scan_, world_.pose(), last_applied_);
  rec.u_r = frame_.command;
  ArbitrationContext ctx{rec.u_h, rec.u_r,
                         static_cast<double>(frame_.masked.blocked_count()) / std::max(1, frame_.masked.size())};
  rec.u_f = arbitrator_(ctx);
  const StepOutcome out = world_.step(rec.u_f);
  rec.new_collision = out.new_collision;
  last_applied_ = out.applied;
  scan_ = world_.scan();
  last_ = rec;
  if (world_.in_goal()) {
    status_ = TrialStatus::Completed;
    completion_time_ = world_.time();
  } else if (world_.time() >= config_.timeout - 1e-9) {
    status_ = TrialStatus::TimedOut;
    completion_time_ = config_.timeout;
  }
  return last_;
}

// ---------------------------------------------------------------------------
// Trials

ArenaMap trial_world(const TrialConfig& config, std::uint64_t seed) {
  const double inflation = config.robot.footprint_radius + config.vfh.safety_distance;
  return place_random_obstacles(config.arena, config.obstacles, seed, inflation);
}

std::uint64_t operator_seed(std::uint64_t trial_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(trial_seed), static_cast<std::uint32_t>(trial_seed >> 32), 0x09e7a70bU};
  std::uint64_t out = 0;
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  out = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return out;
}

TrialMetrics run_trial(const TrialConfig& config, const TrialOptions& options) {
  const std::uint64_t seed = options.seed.value_or(config.seed);
  ArbitrationConfig arb = config.arbitration;
  arb = set_mode(arb, options.mode.value_or(arb.mode()), options.alpha);

  Simulation sim(config, trial_world(config, seed), arb);
  ObservationBuffer observations(config.operator_policy.frame_rate, config.operator_policy.observation_delay);
  std::shared_ptr<const RouteField> field;
  if (config.operator_guidance == OperatorGuidance::Map)
    field = std::make_shared<RouteField>(config.arena, config.robot.footprint_radius + kOperatorMargin,
                                         config.operator_policy.route_clearance);
  ScriptedOperator op(config.operator_policy, operator_seed(seed), field);

  while (sim.status() == TrialStatus::Running) {
    const double t = sim.time();
    Twist issued;
    if (options.replay) {
      issued = replay_step(*options.replay, t);
    } else {
      observations.offer(t, sim.world().pose(), sim.scan());
      issued = op.command(observations.latest(t), t);
    }
    if (options.record_issued) options.record_issued->record(t, issued);
    sim.tick(issued);
  }

  TrialMetrics m;
  m.seed = seed;
  m.mode = arb.mode();
  m.timed_out = sim.status() == TrialStatus::TimedOut;
  m.completion_time = sim.completion_time();
  m.collisions = sim.world().collisions();
  m.path_length = sim.world().path_length();
  return m;
}

// ---------------------------------------------------------------------------
// Summaries and batches

GroupSummary summarize_group(const std::vector<TrialMetrics>& group) {
  GroupSummary g;
  g.n = group.size();
  std::vector<double> times, cols;
  for (const auto& m : group) {
    times.push_back(m.completion_time);
    cols.push_back(m.collisions);
    g.collisions_total += m.collisions;
    g.timeouts += m.timed_out ? 1 : 0;
  }
  g.time_mean = mean(times);
  g.time_sd = stddev(times);
  g.collisions_mean = mean(cols);
  g.collisions_sd = stddev(cols);
  return g;
}

Summary summarize_means(double teleop_time, double shared_time, double teleop_collisions, double shared_collisions) {
  Summary s;
  s.teleop.time_mean = teleop_time;
  s.shared.time_mean = shared_time;
  s.teleop.collisions_mean = teleop_collisions;
  s.shared.collisions_mean = shared_collisions;
  s.time_faster_pct = shared_time != 0.0 ? (teleop_time - shared_time) / shared_time * 100.0 : 0.0;
  s.collision_reduction_pct =
      teleop_collisions != 0.0 ? (teleop_collisions - shared_collisions) / teleop_collisions * 100.0 : 0.0;
  if (shared_collisions != 0.0) {
    s.collision_ratio = teleop_collisions / shared_collisions;
  } else {
    s.collision_ratio = teleop_collisions == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  return s;
}

Summary summarize(const std::vector<TrialMetrics>& teleop, const std::vector<TrialMetrics>& shared) {
  if (teleop.empty() || shared.empty()) throw ValidationError("summarize: both groups must be non-empty");
  const GroupSummary t = summarize_group(teleop);
  const GroupSummary s = summarize_group(shared);
  Summary out = summarize_means(t.time_mean, s.time_mean, t.collisions_mean, s.collisions_mean);
  out.teleop = t;
  out.shared = s;
  return out;
}

std::string csv_header() { return "config_hash,seed,mode,completion_time,timed_out,collisions,path_length\n"; }

std::string csv_row(const std::string& config_hash, const TrialMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%llu,%s,%.3f,%d,%d,%.3f\n", config_hash.c_str(),
                static_cast<unsigned long long>(m.seed), std::string(to_string(m.mode)).c_str(), m.completion_time,
                m.timed_out ? 1 : 0, m.collisions, m.path_length);
  return buf;
}

namespace {

std::string format_summary(const BatchReport& r) {
  std::string out;
  char buf[512];
  auto group = [&](const char* name, const GroupSummary& g) {
    std::snprintf(buf, sizeof buf,
                  "%-7s n=%zu  time M=%.1f SD=%.1f s  collisions M=%.2f SD=%.2f (total %d)  timeouts=%d\n", name, g.n,
                  g.time_mean, g.time_sd, g.collisions_mean, g.collisions_sd, g.collisions_total, g.timeouts);
    out += buf;
  };
  if (r.summary) {
    group("teleop", r.summary->teleop);
    group("shared", r.summary->shared);
    std::snprintf(buf, sizeof buf,
                  "shared control: %.1f%% faster; collisions reduced by %.1f%% (teleop/shared ratio %.2f)\n",
                  r.summary->time_faster_pct, r.summary->collision_reduction_pct, r.summary->collision_ratio);
    out += buf;
  } else {
    std::vector<TrialMetrics> all = r.rows;
    if (!all.empty()) group(std::string(to_string(all.front().mode)).c_str(), summarize_group(all));
  }
  if (r.time_test) {
    std::snprintf(buf, sizeof buf, "time: paired t(%.0f) = %.3f, p = %.3g (%s)\n", r.time_test->df,
                  r.time_test->statistic, r.time_test->p, p_band(r.time_test->p).c_str());
    out += buf;
  }
  if (r.collision_test) {
    std::snprintf(buf, sizeof buf, "collisions: Wilcoxon W+ = %.1f, z = %.2f, p = %.3g (%s)\n",
                  r.collision_test->statistic, r.collision_test->z, r.collision_test->p,
                  p_band(r.collision_test->p).c_str());
    out += buf;
  }
  for (const auto& w : r.warnings) out += "warning: " + w + "\n";
  return out;
}

}  // namespace

BatchReport run_batch(const TrialConfig& config, const BatchOptions& options) {
  if (options.repetitions < 1) throw ValidationError("batch: repetitions must be >= 1");
  if (!options.run_teleop && !options.run_shared) throw ValidationError("batch: no mode selected");
  BatchReport report;
  std::vector<TrialMetrics> teleop, shared;
  for (int i = 0; i < options.repetitions; ++i) {
    const std::uint64_t seed = options.base_seed + static_cast<std::uint64_t>(i);
    std::vector<ControlMode> order{ControlMode::PureTeleop, ControlMode::Shared};
    if (i % 2 == 1) std::swap(order[0], order[1]);
    std::optional<TrialMetrics> t, s;
    for (ControlMode mode : order) {
      if (mode == ControlMode::PureTeleop && !options.run_teleop) continue;
      if (mode == ControlMode::Shared && !options.run_shared) continue;
      TrialOptions opts;
      opts.seed = seed;
      opts.mode = mode;
      opts.alpha = options.alpha;
      (mode == ControlMode::PureTeleop ? t : s) = run_trial(config, opts);
    }
    if (t) {
      report.rows.push_back(*t);
      teleop.push_back(*t);
    }
    if (s) {
      report.rows.push_back(*s);
      shared.push_back(*s);
    }
  }

  if (!teleop.empty() && !shared.empty()) {
    report.summary = summarize(teleop, shared);
    std::vector<double> tt, st, tc, sc;
    for (std::size_t i = 0; i < teleop.size(); ++i) {
      tt.push_back(teleop[i].completion_time);
      st.push_back(shared[i].completion_time);
      tc.push_back(teleop[i].collisions);
      sc.push_back(shared[i].collisions);
    }
    if (teleop.size() >= 2) {
      report.time_test = paired_t_test(tt, st);
    } else {
      report.warnings.push_back("fewer than 2 pairs; paired t-test skipped");
    }
    try {
      report.collision_test = wilcoxon_signed_rank(tc, sc);
    } catch (const ValidationError& e) {
      report.warnings.push_back(std::string("collision test skipped: ") + e.what());
    }
  } else {
    report.warnings.push_back("only one mode ran; paired statistics skipped");
  }

  const std::string hash = config.hash();
  report.csv = csv_header();
  for (const auto& m : report.rows) report.csv += csv_row(hash, m);
  report.summary_text = format_summary(report);
  return report;
}

}  // namespace scnav
