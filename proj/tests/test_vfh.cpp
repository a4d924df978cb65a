#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "scnav/vfh.hpp"

using namespace scnav;

namespace {

const Pose2D kAnchor{5.05, 5.05, 0.0};

HistogramGrid anchored_grid(const VfhParams& p, Pose2D pose = kAnchor) {
  HistogramGrid g(p.window_cells, p.cell_size, p.c_max);
  g.recenter(pose);
  return g;
}

// Free runs found by walking outward from every free sector whose right
// neighbour is blocked.
struct Run {
  int k_r, k_l;
};

std::vector<Run> brute_runs(const SectorMask& m) {
  const int n = m.size();
  std::vector<Run> runs;
  for (int k = 0; k < n; ++k) {
    if (m.is_blocked(k) || !m.is_blocked((k + n - 1) % n)) continue;
    int len = 0;
    while (!m.is_blocked((k + len) % n)) ++len;
    runs.push_back({k, k + len - 1});
  }
  return runs;
}

}  // namespace

TEST_CASE("active window range") {
  CHECK(active_window_range(60, 0.1) == doctest::Approx(4.171930009000628).epsilon(1e-12));
  CHECK(std::abs(VfhParams{}.d_max() - 4.1719) < 1e-3);
  CHECK(active_window_range(3, 1.0) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("sector conventions") {
  VfhParams p;
  CHECK(p.n_sectors() == 72);
  CHECK(p.target_sector() == 18);
  CHECK(p.sector_offset(18) == doctest::Approx(0.0));
  CHECK(p.sector_offset(0) == doctest::Approx(-kPi / 2.0));
  CHECK(p.sector_offset(54) == doctest::Approx(kPi));
  CHECK(p.sector_distance(70, 2) == 4);
  CHECK(p.sector_of(-deg2rad(5.0)) == 71);
  CHECK(p.enlarged_radius() == doctest::Approx(0.54));
  CHECK(p.tau_high == doctest::Approx(3000.0));
  CHECK(p.tau_low == doctest::Approx(1800.0));
  CHECK_NOTHROW(p.validate());
  VfhParams bad = p;
  bad.mu1 = 3.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = p;
  bad.alpha_res = deg2rad(7.0);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("certainty grid update and recentering") {
  VfhParams p;
  HistogramGrid g(p.window_cells, p.cell_size, p.c_max);
  LaserScan scan{0.0, 0.0, 1.0, 5.0, {2.0}};  // one beam straight ahead
  for (int k = 0; k < 25; ++k) g.update(scan, kAnchor);
  const auto hit = g.locate({kAnchor.x + 2.0 + 1e-6, kAnchor.y});
  REQUIRE(hit);
  CHECK(g.at(hit->first, hit->second) == p.c_max);
  CHECK(g.nonzero_count() == 1);

  // A max-range beam clears what it crosses and marks nothing.
  LaserScan miss{0.0, 0.0, 1.0, 5.0, {5.0}};
  for (int k = 0; k < 25; ++k) g.update(miss, kAnchor);
  CHECK(g.nonzero_count() == 0);

  HistogramGrid h = anchored_grid(p);
  h.set(40, 30, 7);
  h.recenter({kAnchor.x + 0.1, kAnchor.y, 0.0});
  CHECK(h.at(39, 30) == 7);
  CHECK(h.nonzero_count() == 1);
  h.recenter({kAnchor.x + 7.0, kAnchor.y, 0.0});
  CHECK(h.nonzero_count() == 0);
  h.set(0, 0, 1000);
  CHECK(h.at(0, 0) == p.c_max);
}

TEST_CASE("primary histogram matches an angular-window oracle") {
  VfhParams p;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> idx(0, p.window_cells - 1), cert(1, p.c_max);
  std::uniform_real_distribution<double> heading(-kPi, kPi);
  const int n = p.n_sectors();
  for (int trial = 0; trial < 50; ++trial) {
    const Pose2D pose{5.05, 5.05, heading(rng)};
    auto g = anchored_grid(p, pose);
    std::vector<double> expected(static_cast<std::size_t>(n), 0.0);
    for (int c = 0; c < 40; ++c) {
      const int i = idx(rng), j = idx(rng);
      if (g.at(i, j) != 0) continue;
      const Vec2 rel = g.cell_center(i, j) - pose.position();
      const double d = rel.norm();
      const double gamma = d <= p.enlarged_radius() ? kPi / 2.0 : std::asin(p.enlarged_radius() / d);
      const double beta = std::atan2(rel.y, rel.x) - pose.theta + kPi / 2.0;
      bool ambiguous = false;
      std::vector<int> covered;
      for (int k = 0; k < n; ++k) {
        const double diff = std::abs(wrap_angle(k * p.alpha_res - beta));
        if (std::abs(diff - gamma) < 1e-7) ambiguous = true;
        if (diff < gamma) covered.push_back(k);
      }
      if (ambiguous) continue;
      const int certainty = cert(rng);
      g.set(i, j, certainty);
      const double m = d < p.d_max() ? certainty * certainty * (p.a - p.b() * d * d) : 0.0;
      for (int k : covered) expected[static_cast<std::size_t>(k)] += m;
    }
    const auto h = build_primary(g, p);
    for (int k = 0; k < n; ++k)
      REQUIRE(h.magnitudes[static_cast<std::size_t>(k)] ==
              doctest::Approx(expected[static_cast<std::size_t>(k)]).epsilon(1e-9));
  }
}

TEST_CASE("cells beyond the window horizon contribute nothing") {
  VfhParams p;
  auto g = anchored_grid(p);
  g.set(0, 0, p.c_max);
  CHECK((g.cell_center(0, 0) - kAnchor.position()).norm() > p.d_max());
  auto h = build_primary(g, p);
  CHECK(*std::max_element(h.magnitudes.begin(), h.magnitudes.end()) == 0.0);

  g.set(0, 0, 0);
  g.set(p.window_cells - 1, p.window_cells - 1, p.c_max);
  const double d = (g.cell_center(p.window_cells - 1, p.window_cells - 1) - kAnchor.position()).norm();
  CHECK(d == doctest::Approx(2.9 * std::sqrt(2.0)));
  h = build_primary(g, p);
  const double m = 400.0 * 100.0 * (1.0 - d * d / (p.d_max() * p.d_max()));
  CHECK(h.magnitudes[27] == doctest::Approx(m));
}

TEST_CASE("binary hysteresis") {
  VfhParams p;
  PrimaryPolarHistogram h{std::vector<double>(72, 0.0)};
  auto prev = SectorMask::all_free(72);
  h.magnitudes[0] = 3500.0;
  h.magnitudes[1] = 2500.0;
  h.magnitudes[2] = 3000.0;
  auto b = build_binary(h, prev, p);
  CHECK(b.is_blocked(0));
  CHECK_FALSE(b.is_blocked(1));
  CHECK_FALSE(b.is_blocked(2));
  h.magnitudes[0] = 2500.0;
  b = build_binary(h, b, p);
  CHECK(b.is_blocked(0));
  h.magnitudes[0] = 1800.0;
  b = build_binary(h, b, p);
  CHECK(b.is_blocked(0));
  h.magnitudes[0] = 1799.0;
  b = build_binary(h, b, p);
  CHECK_FALSE(b.is_blocked(0));
  CHECK_THROWS_AS(build_binary(h, SectorMask::all_free(10), p), ValidationError);
}

TEST_CASE("turning-circle mask on a left obstacle") {
  VfhParams p;
  auto g = anchored_grid(p);
  // Robot frame (0.5, 0.5): forward-left at 45 degrees, inside the left circle.
  g.set(35, 35, 5);
  const auto free = SectorMask::all_free(72);
  const auto m = build_masked(free, {0.8, 0.0}, g, p, 1.0);
  for (int k = 0; k < 72; ++k) CHECK(m.is_blocked(k) == (k >= 28 && k <= 54));
  CHECK(build_masked(free, {0.0, 0.3}, g, p, 1.0) == free);

  auto far = anchored_grid(p);
  far.set(55, 55, 5);  // (2.5, 2.5): beyond the circle reach
  CHECK(build_masked(free, {0.8, 0.0}, far, p, 1.0) == free);
}

TEST_CASE("masking only adds blocked sectors") {
  VfhParams p;
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> idx(0, p.window_cells - 1), cert(1, p.c_max), flip(0, 9);
  std::uniform_real_distribution<double> v(0.0, 0.8), heading(-kPi, kPi);
  for (int trial = 0; trial < 1000; ++trial) {
    auto g = anchored_grid(p, {5.05, 5.05, heading(rng)});
    const int cells = 1 + trial % 60;
    for (int c = 0; c < cells; ++c) g.set(idx(rng), idx(rng), cert(rng));
    auto prev = SectorMask::all_free(72);
    for (auto& b : prev.blocked) b = flip(rng) == 0;
    const auto binary = build_binary(build_primary(g, p), prev, p);
    const auto masked = build_masked(binary, {v(rng), 0.0}, g, p, 1.0);
    for (int k = 0; k < 72; ++k)
      if (binary.is_blocked(k)) REQUIRE(masked.is_blocked(k));
    REQUIRE(build_masked(binary, {0.0, 0.5}, g, p, 1.0) == binary);
  }
}

TEST_CASE("candidates agree with a brute-force opening scanner") {
  VfhParams p;
  const int n = 72;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int narrow_seen = 0, wide_seen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    SectorMask m = SectorMask::all_free(n);
    const double density = 0.02 + 0.5 * u(rng);
    for (auto& b : m.blocked) b = u(rng) < density;
    if (m.blocked_count() == 0) m.blocked[static_cast<std::size_t>(trial % n)] = 1;
    if (m.blocked_count() == n) continue;

    std::set<int> expected;
    for (const Run& r : brute_runs(m)) {
      const int width = r.k_l - r.k_r;
      if (width < p.s_max) {
        ++narrow_seen;
        const int lo = r.k_r + width / 2;
        int pick = lo % n;
        if (width % 2 == 1 && p.sector_distance((lo + 1) % n, 18) < p.sector_distance(lo % n, 18))
          pick = (lo + 1) % n;
        expected.insert(pick);
      } else {
        ++wide_seen;
        const int c_r = r.k_r + p.s_max / 2, c_l = r.k_l - p.s_max / 2;
        expected.insert(c_r % n);
        expected.insert(c_l % n);
        for (int t : {18, 18 + n})
          if (t >= c_r && t <= c_l) expected.insert(18);
      }
    }
    const auto cands = find_candidates(m, p);
    std::set<int> got;
    for (const auto& c : cands) {
      REQUIRE_FALSE(m.is_blocked(c.sector));
      got.insert(c.sector);
    }
    REQUIRE(got.size() == cands.size());
    REQUIRE(got == expected);
  }
  CHECK(narrow_seen > 100);
  CHECK(wide_seen > 100);

  CHECK(find_candidates(SectorMask::all_free(n), p).size() == 1);
  CHECK(find_candidates(SectorMask::all_free(n), p).front().sector == 18);
  SectorMask full{std::vector<std::uint8_t>(72, 1)};
  CHECK(find_candidates(full, p).empty());
}

TEST_CASE("openings wrap around sector zero") {
  SectorMask m{std::vector<std::uint8_t>(72, 1)};
  for (int k : {70, 71, 0, 1, 2}) m.blocked[static_cast<std::size_t>(k)] = 0;
  const auto o = find_openings(m);
  REQUIRE(o.size() == 1);
  CHECK(o[0].k_r == 70);
  CHECK(o[0].k_l == 74);
  const auto c = find_candidates(m, VfhParams{});
  REQUIRE(c.size() == 1);
  CHECK(c[0].sector == 0);
  CHECK(c[0].kind == CandidateKind::NarrowCenter);
}

TEST_CASE("selection cost and tie-breaks") {
  VfhParams p;
  std::vector<Candidate> c{{10, CandidateKind::WideRight, 0}, {30, CandidateKind::WideLeft, 0}};
  CHECK(select_direction(c, 18, p) == 10);
  CHECK(c[0].cost == doctest::Approx(72.0));
  CHECK(c[1].cost == doctest::Approx(108.0));

  std::vector<Candidate> tie{{22, CandidateKind::WideLeft, 0}, {14, CandidateKind::WideRight, 0}};
  CHECK(select_direction(tie, 18, p) == 14);
  CHECK(select_direction(tie, 22, p) == 22);
  std::vector<Candidate> none;
  CHECK_FALSE(select_direction(none, 18, p).has_value());
  CHECK(candidate_cost(18, 18, p, 20) == doctest::Approx(4.0));
}

TEST_CASE("selection is invariant to scaling the weights") {
  VfhParams p;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> sector(0, 71), count(1, 6);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<Candidate> c;
    for (int i = count(rng); i > 0; --i) c.push_back({sector(rng), CandidateKind::NarrowCenter, 0});
    const int prev = sector(rng), heading = sector(rng);
    auto scaled = p;
    const double s = std::ldexp(1.0, trial % 7 - 3);
    scaled.mu1 *= s;
    scaled.mu2 *= s;
    scaled.mu3 *= s;
    auto c2 = c;
    REQUIRE(select_direction(c, prev, p, heading) == select_direction(c2, prev, scaled, heading));
  }
}

TEST_CASE("direction to twist") {
  VfhParams p;
  RobotSpec spec;
  auto free = SectorMask::all_free(72);
  CHECK(direction_to_twist(18, free, p, spec) == Twist{0.8, 0.0});
  const Twist left = direction_to_twist(27, free, p, spec);
  CHECK(left.angular == doctest::Approx(1.0));
  CHECK(left.linear == doctest::Approx(0.8 * std::cos(kPi / 4.0)));
  const Twist gentle = direction_to_twist(20, free, p, spec);
  CHECK(gentle.angular == doctest::Approx(1.5 * deg2rad(10.0)));
  CHECK(direction_to_twist(0, free, p, spec).linear == doctest::Approx(0.0));
  auto partly = free;
  for (int k = 0; k < 4; ++k) partly.blocked[static_cast<std::size_t>(k)] = 1;
  CHECK(direction_to_twist(18, partly, p, spec).linear == doctest::Approx(0.8 * 33.0 / 37.0));
  CHECK(direction_to_twist(std::nullopt, free, p, spec) == Twist{});
}

TEST_CASE("planner drives straight in open space") {
  ArenaMap map = make_arena(40.0, 20.0, 0.1, {}, {}, {3.0, 10.0, 0.0}, {{38.0, 10.0}, 0.5});
  World world(map, RobotSpec{}, SensorSpec{}, 0.05);
  VfhPlanner planner(VfhParams{}, RobotSpec{});
  Twist last;
  double max_dev = 0.0;
  int off_forward = 0;
  while (world.pose().x < 13.0 && world.time() < 60.0) {
    const auto f = planner.update(world.scan(), world.pose(), last);
    off_forward += f.selected != 18;
    world.step(f.command);
    last = f.command;
    max_dev = std::max(max_dev, std::abs(world.pose().y - 10.0));
  }
  CHECK(world.pose().x >= 13.0);
  CHECK(max_dev < 0.01);
  CHECK(off_forward == 0);
}

TEST_CASE("planner turns away from a blocking obstacle") {
  ArenaMap map = make_arena(20.0, 20.0, 0.1, {}, {{Circle{{6.0, 10.0}, 0.6}}}, {3.0, 10.0, 0.0}, {{18.0, 10.0}, 0.5});
  World world(map, RobotSpec{}, SensorSpec{}, 0.05);
  VfhPlanner planner(VfhParams{}, RobotSpec{});
  Twist last;
  for (int k = 0; k < 400; ++k) {
    const auto f = planner.update(world.scan(), world.pose(), last);
    world.step(f.command);
    last = f.command;
  }
  CHECK(world.collisions() == 0);
  CHECK(world.pose().x > 7.0);
}
