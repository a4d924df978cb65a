// Acceptance checks P1..P9. One PASS/FAIL line each; exit status is the
// number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "scnav/bridge.hpp"
#include "scnav/harness.hpp"
#include "scnav/stats.hpp"

using namespace scnav;

namespace {

constexpr int kP1Seeds = 20;
constexpr double kP1Alpha = 0.05;
constexpr double kP1Budget = 300.0;  // seconds
constexpr double kP2Expected = 4.1719, kP2Tol = 1e-3;
constexpr double kP3Distance = 10.0, kP3MaxDeviation = 0.01;
constexpr int kP4Triples = 100000;
constexpr double kP4Tol = 1e-12;
constexpr int kP5Masks = 1000;
constexpr int kP6Grids = 1000;
constexpr double kP7StatTol = 1e-9, kP7PTol = 1e-6;
constexpr double kP8Delay = 1.0, kDt = 0.05;

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("%s %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::filesystem::path kConfigs = std::filesystem::path(SCNAV_SOURCE_DIR) / "configs";

void p1() {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = load_trial_config(kConfigs / "trial.conf");
  BatchOptions opt;
  opt.repetitions = kP1Seeds;
  opt.base_seed = cfg.seed;
  opt.alpha = 0.5;
  const auto r = run_batch(cfg, opt);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!r.summary || !r.time_test) {
    report("P1", false, "batch produced no paired summary");
    return;
  }
  const auto& s = *r.summary;
  const bool faster = s.shared.time_mean < s.teleop.time_mean && r.time_test->p < kP1Alpha;
  const bool safer = s.shared.collisions_total < s.teleop.collisions_total;
  const bool sized = cfg.arena.width == 24.0 && cfg.arena.height == 24.0 && cfg.command_delay == 1.0 &&
                     std::abs(cfg.operator_policy.observation_delay - 1.4) < 1e-12 && cfg.operator_preset == "teleop_like";
  report("P1", faster && safer && sized && elapsed < kP1Budget,
         fmt("n=%d time teleop %.1f s vs shared %.1f s, t(%.0f)=%.3f p=%.3g; collisions %d vs %d; %.0f s", kP1Seeds,
             s.teleop.time_mean, s.shared.time_mean, r.time_test->df, r.time_test->statistic, r.time_test->p,
             s.teleop.collisions_total, s.shared.collisions_total, elapsed));
}

void p2() {
  const double d = active_window_range(60, 0.1);
  report("P2", std::abs(d - kP2Expected) <= kP2Tol, fmt("d_max = %.6f m", d));
}

void p3() {
  ArenaMap map = make_arena(40.0, 20.0, 0.1, {}, {}, {3.0, 10.0, 0.0}, {{38.0, 10.0}, 0.5});
  World world(map, RobotSpec{}, SensorSpec{}, kDt);
  const VfhParams params;
  VfhPlanner planner(params, RobotSpec{});
  Twist last;
  double dev = 0.0;
  int off = 0, ticks = 0;
  while (world.pose().x - 3.0 < kP3Distance && world.time() < 60.0) {
    const auto f = planner.update(world.scan(), world.pose(), last);
    off += f.selected != params.target_sector();
    ++ticks;
    world.step(f.command);
    last = f.command;
    dev = std::max(dev, std::abs(world.pose().y - 10.0));
  }
  const double travelled = world.pose().x - 3.0;
  report("P3", travelled >= kP3Distance && dev < kP3MaxDeviation && off == 0,
         fmt("%.2f m in %d ticks, max lateral %.2e m, %d ticks off the forward sector", travelled, ticks, dev, off));
}

void p4() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.0, 1.0);
  double worst = 0.0;
  bool identities = true;
  const ArbitrationConfig one(1.0, ControlMode::Shared), zero(0.0, ControlMode::Shared);
  for (int i = 0; i < kP4Triples; ++i) {
    const Twist h{u(rng), u(rng)}, r{u(rng), u(rng)};
    const double a = w(rng);
    identities = identities && blend(h, r, one) == h && blend(h, r, zero) == r;
    const Twist f = blend(h, r, ArbitrationConfig(a, ControlMode::Shared));
    auto outside = [](double x, double p, double q) {
      return std::max({0.0, std::min(p, q) - x, x - std::max(p, q)});
    };
    worst = std::max({worst, outside(f.linear, h.linear, r.linear), outside(f.angular, h.angular, r.angular),
                      std::abs(f.linear - (a * h.linear + (1.0 - a) * r.linear)),
                      std::abs(f.angular - (a * h.angular + (1.0 - a) * r.angular))});
  }
  report("P4", identities && worst <= kP4Tol,
         fmt("%d triples, identities %s, worst deviation %.2e", kP4Triples, identities ? "exact" : "broken", worst));
}

// Walks outward from each free sector whose right neighbour is blocked.
std::vector<std::pair<int, int>> brute_runs(const SectorMask& m) {
  const int n = m.size();
  std::vector<std::pair<int, int>> runs;
  for (int k = 0; k < n; ++k) {
    if (m.is_blocked(k) || !m.is_blocked((k + n - 1) % n)) continue;
    int len = 0;
    while (!m.is_blocked((k + len) % n)) ++len;
    runs.emplace_back(k, k + len - 1);
  }
  return runs;
}

void p5() {
  const VfhParams p;
  const int n = p.n_sectors(), target = p.target_sector();
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0, bad = 0, narrow = 0, wide = 0;
  while (checked < kP5Masks) {
    SectorMask m = SectorMask::all_free(n);
    const double density = 0.02 + 0.5 * u(rng);
    for (auto& b : m.blocked) b = u(rng) < density;
    if (m.blocked_count() == 0 || m.blocked_count() == n) continue;
    ++checked;
    std::vector<int> expected;
    for (const auto& [k_r, k_l] : brute_runs(m)) {
      const int width = k_l - k_r;
      if (width < p.s_max) {
        ++narrow;
        const int lo = k_r + width / 2;
        int pick = lo % n;
        if (width % 2 == 1 && p.sector_distance((lo + 1) % n, target) < p.sector_distance(lo % n, target))
          pick = (lo + 1) % n;
        expected.push_back(pick);
      } else {
        ++wide;
        const int c_r = k_r + p.s_max / 2, c_l = k_l - p.s_max / 2;
        expected.push_back(c_r % n);
        expected.push_back(c_l % n);
        for (int t : {target, target + n})
          if (t >= c_r && t <= c_l) expected.push_back(target);
      }
    }
    std::sort(expected.begin(), expected.end());
    expected.erase(std::unique(expected.begin(), expected.end()), expected.end());
    std::vector<int> got;
    bool in_free = true;
    for (const auto& c : find_candidates(m, p)) {
      in_free = in_free && !m.is_blocked(c.sector);
      got.push_back(c.sector);
    }
    std::sort(got.begin(), got.end());
    bad += !(in_free && got == expected);
  }
  report("P5", bad == 0 && narrow > 0 && wide > 0,
         fmt("%d masks (%d narrow, %d wide openings), %d mismatches", checked, narrow, wide, bad));
}

void p6() {
  const VfhParams p;
  std::mt19937_64 rng(66);
  std::uniform_int_distribution<int> idx(0, p.window_cells - 1), cert(1, p.c_max), flip(0, 9);
  std::uniform_real_distribution<double> v(0.0, 0.8), heading(-kPi, kPi);
  int not_superset = 0, zero_differs = 0, added = 0;
  for (int trial = 0; trial < kP6Grids; ++trial) {
    HistogramGrid g(p.window_cells, p.cell_size, p.c_max);
    g.recenter({5.05, 5.05, heading(rng)});
    const int cells = 1 + trial % 60;
    for (int c = 0; c < cells; ++c) g.set(idx(rng), idx(rng), cert(rng));
    auto prev = SectorMask::all_free(p.n_sectors());
    for (auto& b : prev.blocked) b = flip(rng) == 0;
    const auto binary = build_binary(build_primary(g, p), prev, p);
    const auto masked = build_masked(binary, {v(rng), 0.0}, g, p, RobotSpec{}.w_max);
    for (int k = 0; k < binary.size(); ++k) {
      not_superset += binary.is_blocked(k) && !masked.is_blocked(k);
      added += masked.is_blocked(k) && !binary.is_blocked(k);
    }
    zero_differs += !(build_masked(binary, {0.0, 0.5}, g, p, RobotSpec{}.w_max) == binary);
  }
  report("P6", not_superset == 0 && zero_differs == 0,
         fmt("%d grids, %d sectors unblocked by masking, %d zero-speed differences (%d sectors added)", kP6Grids,
             not_superset, zero_differs, added));
}

struct StatsFixture {
  std::vector<double> a, b;
  double t, t_p, w_plus, w_p;  // scipy reference values
};

double brute_t(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double s = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] - b[i];
  const double m = s / n;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - m) * (a[i] - b[i] - m);
  return m / std::sqrt(ss / (n - 1.0) / n);
}

double brute_w_plus(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  double w = 0.0;
  for (double x : d) {
    if (x <= 0.0) continue;
    double smaller = 0.0, equal = 0.0;
    for (double y : d) {
      smaller += std::abs(y) < std::abs(x);
      equal += std::abs(y) == std::abs(x);
    }
    w += 1.0 + smaller + (equal - 1.0) / 2.0;
  }
  return w;
}

void p7() {
  const std::vector<StatsFixture> fx = {
      {{212.4, 198.7, 305.2, 250.0, 187.3, 222.9, 264.1, 241.6, 199.8, 230.5, 276.4, 218.0},
       {160.2, 171.5, 201.9, 188.4, 150.6, 170.3, 190.7, 181.2, 166.0, 175.9, 199.3, 162.4},
       9.578454702671667, 1.1349571444416105e-06, 78.0, 0.002526174268502165},
      {{5, 3, 7, 2, 0, 4, 6, 3, 3, 8, 1, 5, 2, 4, 0, 6, 3, 2, 5, 4},
       {1, 1, 2, 2, 0, 1, 3, 0, 1, 2, 1, 0, 1, 1, 0, 2, 1, 0, 2, 1},
       6.474259072229898, 3.328736601727999e-06, 136.0, 0.00043467591341974645},
      {{1.2, -0.4, 3.3, 0.9, 2.2, -1.5, 0.7, 1.9},
       {0.8, 0.6, 1.1, 1.4, 0.5, -0.2, 0.7, 0.3},
       0.830588924339077, 0.43361744054184226, 19.0, 0.4468728207108308},
  };
  double stat_err = 0.0, p_err = 0.0;
  for (const auto& f : fx) {
    const auto t = paired_t_test(f.a, f.b);
    const auto w = wilcoxon_signed_rank(f.a, f.b);
    stat_err = std::max({stat_err, std::abs(t.statistic - brute_t(f.a, f.b)), std::abs(t.statistic - f.t),
                         std::abs(w.statistic - brute_w_plus(f.a, f.b)), std::abs(w.statistic - f.w_plus)});
    p_err = std::max({p_err, std::abs(t.p - f.t_p), std::abs(w.p - f.w_p)});
  }
  const std::string t_band = p_band(student_t_two_tailed(10.209, 11.0));
  const std::string z_band = p_band(normal_two_tailed(-2.82));
  report("P7", stat_err <= kP7StatTol && p_err <= kP7PTol && t_band == "p < .001" && z_band == "p < .01",
         fmt("statistic err %.1e, p err %.1e; t(11)=10.209 -> %s; z=-2.82 -> %s", stat_err, p_err, t_band.c_str(),
             z_band.c_str()));
}

void p8() {
  ArenaMap map = make_arena(10.0, 10.0, 0.1, {}, {}, {2.0, 5.0, 0.0}, {{9.0, 5.0}, 0.5});
  World world(map, RobotSpec{}, SensorSpec{}, kDt);
  DelayedChannel ch(kP8Delay);
  double onset = -1.0;
  for (int k = 0; k < 100 && onset < 0.0; ++k) {
    const double t = k * kDt;
    ch.push(t, {0.5, 0.0});
    const Pose2D before = world.pose();
    world.step(ch.sample(t));
    if (world.pose().x != before.x) onset = t;
  }
  report("P8", onset >= 0.0 && std::abs(onset - kP8Delay) <= kDt + 1e-9,
         fmt("step at 0.0 s, motion onset at %.3f s", onset));
}

void p9() {
  const auto cfg = load_trial_config(kConfigs / "trial.conf");
  BatchOptions opt;
  opt.repetitions = 3;
  opt.base_seed = 7;
  const bool csv_same = run_batch(cfg, opt).csv == run_batch(cfg, opt).csv;

  auto short_cfg = cfg;
  short_cfg.timeout = 60.0;
  BridgeSession session(short_cfg, 11);
  const auto client = session.connect();
  session.start();
  for (int k = 0; !session.metrics(); ++k) {
    if (k % 9 == 0) {
      const double lin = 0.5 + 0.5 * std::sin(0.031 * k), ang = 0.8 * std::sin(0.017 * k);
      session.handle_message(client, "{\"v\":1,\"type\":\"twist\",\"linear\":" + std::to_string(lin) +
                                         ",\"angular\":" + std::to_string(ang) + "}");
    }
    session.step();
  }
  const CommandTrace trace = CommandTrace::parse(session.trace().to_text());
  TrialOptions rep;
  rep.seed = 11;
  rep.mode = ControlMode::Shared;
  rep.replay = &trace;
  const auto replayed = run_trial(short_cfg, rep);
  const auto& live = *session.metrics();
  report("P9", csv_same && replayed == live,
         fmt("batch CSV %s; session %.2f s / %d collisions / %.3f m, replay %.2f s / %d collisions / %.3f m",
             csv_same ? "byte-identical" : "differs", live.completion_time, live.collisions, live.path_length,
             replayed.completion_time, replayed.collisions, replayed.path_length));
}

}  // namespace

int main() {
  try {
    p1();
    p2();
    p3();
    p4();
    p5();
    p6();
    p7();
    p8();
    p9();
  } catch (const std::exception& e) {
    std::printf("aborted: %s\n", e.what());
    return 100;
  }
  return failures;
}
