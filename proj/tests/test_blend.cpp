#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "scnav/blend.hpp"

using namespace scnav;

TEST_CASE("equal weighting example") {
  const Twist f = blend({0.8, 0.0}, {0.4, 0.6}, ArbitrationConfig(0.5, ControlMode::Shared));
  CHECK(f.linear == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(f.angular == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("identities, convexity and affinity on random triples") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0), w(0.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    const Twist h{u(rng), u(rng)}, r{u(rng), u(rng)};
    const double a = w(rng);
    REQUIRE(blend(h, r, ArbitrationConfig(1.0, ControlMode::Shared)) == h);
    REQUIRE(blend(h, r, ArbitrationConfig(0.0, ControlMode::Shared)) == r);
    const Twist f = blend(h, r, ArbitrationConfig(a, ControlMode::Shared));
    REQUIRE(f.linear >= std::min(h.linear, r.linear));
    REQUIRE(f.linear <= std::max(h.linear, r.linear));
    REQUIRE(f.angular >= std::min(h.angular, r.angular));
    REQUIRE(f.angular <= std::max(h.angular, r.angular));
    // Finite difference in alpha equals u_h - u_r.
    if (a < 0.99) {
      const double da = 0.01;
      const Twist g = blend(h, r, ArbitrationConfig(a + da, ControlMode::Shared));
      REQUIRE(std::abs((g.linear - f.linear) / da - (h.linear - r.linear)) < 1e-9 / da + 1e-9);
      REQUIRE(std::abs((g.angular - f.angular) / da - (h.angular - r.angular)) < 1e-9 / da + 1e-9);
    }
    REQUIRE(blend(h, h, ArbitrationConfig(a, ControlMode::Shared)) == h);
  }
}

TEST_CASE("pure teleop passes the operator through") {
  const Twist h{0.3, -0.2};
  CHECK(blend(h, {0.8, 1.0}, ArbitrationConfig(0.0, ControlMode::PureTeleop)) == h);
}

TEST_CASE("alpha is validated") {
  CHECK_THROWS_AS(ArbitrationConfig(1.5, ControlMode::Shared), ValidationError);
  CHECK_THROWS_AS(ArbitrationConfig(-0.01, ControlMode::Shared), ValidationError);
  CHECK_THROWS_AS(ArbitrationConfig(std::nan(""), ControlMode::Shared), ValidationError);
  ArbitrationConfig c;
  CHECK_THROWS_AS(c.set_alpha(1.5), ValidationError);
  CHECK(c.alpha() == 0.5);
  CHECK_NOTHROW(set_mode(c, ControlMode::Shared, 0.3));
  CHECK_THROWS_AS(set_mode(c, ControlMode::Shared, 1.5), ValidationError);
}

TEST_CASE("mode switch") {
  const auto c = set_mode(ArbitrationConfig(0.5, ControlMode::Shared), ControlMode::PureTeleop);
  CHECK(c.mode() == ControlMode::PureTeleop);
  CHECK(c.alpha() == 0.5);
  CHECK(blend({0.1, 0.2}, {0.7, 0.7}, c) == Twist{0.1, 0.2});
  CHECK(parse_control_mode("pure-teleop") == ControlMode::PureTeleop);
  CHECK(parse_control_mode("shared") == ControlMode::Shared);
  CHECK(to_string(ControlMode::PureTeleop) == "teleop");
  CHECK_THROWS_AS(parse_control_mode("auto"), ValidationError);
}

TEST_CASE("non-finite components are rejected") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(blend({inf, 0}, {0, 0}, ArbitrationConfig()), ValidationError);
  CHECK_THROWS_AS(blend({0, 0}, {0, std::nan("")}, ArbitrationConfig()), ValidationError);
}

TEST_CASE("arbitrator uses its function") {
  Arbitrator constant(ArbitrationConfig(0.25, ControlMode::Shared));
  const Twist f = constant({{1.0, 0.0}, {0.0, 1.0}, 0.9});
  CHECK(f.linear == doctest::Approx(0.25));
  CHECK(f.angular == doctest::Approx(0.75));

  Arbitrator dynamic(ArbitrationConfig(0.5, ControlMode::Shared),
                     [](const ArbitrationContext& ctx, const ArbitrationConfig&) { return 1.0 - ctx.blocked_fraction; });
  CHECK(dynamic({{1.0, 0.0}, {0.0, 0.0}, 1.0}) == Twist{0.0, 0.0});
  dynamic.configure(ControlMode::PureTeleop);
  CHECK(dynamic({{1.0, 0.0}, {0.0, 0.0}, 1.0}) == Twist{1.0, 0.0});

  Arbitrator bad(ArbitrationConfig(), [](const ArbitrationContext&, const ArbitrationConfig&) { return 2.0; });
  CHECK_THROWS_AS(bad({}), ValidationError);
}
