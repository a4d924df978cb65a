#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "scnav/config.hpp"

using namespace scnav;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(SCNAV_SOURCE_DIR) / "configs";

const char* kSmall = R"(
arena.width = 10
arena.height = 8   # trailing comment
arena.start = 1 1 0
arena.goal = 9 7 0.5
wall = 4 0 4.4 5
obstacle = circle 7 3 0.4
obstacle = polygon 2 5 3 5 3 6 2 6
waypoint = 2 7
)";

}  // namespace

TEST_CASE("key = value parsing") {
  const auto doc = ConfigDocument::parse(kSmall);
  CHECK(doc.get_double("arena.width", 0) == 10.0);
  CHECK(doc.find("arena.height")->line == 3);
  CHECK(doc.list("obstacle").size() == 2);
  CHECK(doc.get_numbers("arena.goal", 3) == std::vector<double>{9, 7, 0.5});
  CHECK(doc.get_int("trial.seed", 7) == 7);
  CHECK_THROWS_AS(doc.get_numbers("arena.goal", 2), ParseError);

  const auto arena = load_arena(doc);
  CHECK(arena.width == 10.0);
  CHECK(arena.obstacles.size() == 2);
  CHECK(arena.walls.occupied(41, 20));
  CHECK_FALSE(arena.walls.occupied(45, 20));
  CHECK(arena.goal.radius == 0.5);
  CHECK(arena.route.size() == 1);
}

TEST_CASE("parse errors name the line and field") {
  try {
    ConfigDocument::parse("arena.width = 10\nbogus.key = 3\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.field() == "bogus.key");
  }
  CHECK_THROWS_AS(ConfigDocument::parse("arena.width 10\n"), ParseError);
  CHECK_THROWS_AS(ConfigDocument::parse("arena.width =\n"), ParseError);
  CHECK_THROWS_AS(ConfigDocument::parse("include = does_not_exist.conf\n"), ParseError);
  try {
    ConfigDocument::parse("arena.width = ten\n").get_double("arena.width", 0);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  CHECK_THROWS_AS(ConfigDocument::parse("trial.seed = 1.5\n").get_int("trial.seed", 0), ParseError);
  CHECK_THROWS_AS(load_arena_text("arena.width = 10\narena.height = 8\narena.start = 1 1 0\n"
                                  "arena.goal = 9 7 0.5\nobstacle = hexagon 1 2\n"),
                  ParseError);
  ConfigDocument d;
  CHECK_THROWS_AS(d.set("nope", "1"), ParseError);
}

TEST_CASE("shipped trial config") {
  const auto c = load_trial_config(kConfigs / "trial.conf");
  CHECK(c.arena.width == 24.0);
  CHECK(c.arena.height == 24.0);
  CHECK(c.command_delay == 1.0);
  CHECK(c.operator_policy.observation_delay == doctest::Approx(1.4));
  CHECK(c.arbitration.alpha() == 0.5);
  CHECK(c.arbitration.mode() == ControlMode::Shared);
  CHECK(c.operator_preset == "teleop_like");
  CHECK(c.vfh.window_cells == 60);
  CHECK(c.obstacles.count > 0);
  CHECK(c.hash().size() == 16);
}

TEST_CASE("out-of-range alpha is rejected") {
  try {
    load_trial_config(kConfigs / "broken.conf");
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(e.field() == "blend.alpha");
    CHECK(e.line() == 3);
  }
}

TEST_CASE("includes resolve relative to the including file") {
  const auto dir = std::filesystem::temp_directory_path() / "scnav_cfg_test";
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "base.conf") << kSmall;
  std::ofstream(dir / "top.conf") << "include = sub/base.conf\narena.width = 12\nwaypoint = 3 7\n";
  const auto doc = ConfigDocument::load(dir / "top.conf");
  CHECK(doc.get_double("arena.width", 0) == 12.0);
  CHECK(doc.list("waypoint").size() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("canonical form and hash") {
  const auto a = ConfigDocument::parse("arena.width = 10\n# c\narena.height = 8\n");
  const auto b = ConfigDocument::parse("arena.height   =   8\narena.width = 10");
  CHECK(a.canonical() == b.canonical());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);

  auto doc = ConfigDocument::load(kConfigs / "trial.conf");
  const auto h1 = make_trial_config(doc).hash();
  doc.set("trial.seed", "2");
  const auto c2 = make_trial_config(doc);
  CHECK(c2.seed == 2);
  CHECK(c2.hash() != h1);
}

TEST_CASE("overrides are validated") {
  auto doc = ConfigDocument::load(kConfigs / "trial.conf");
  doc.set("operator.cruise_speed", "1.5");
  CHECK_THROWS_AS(make_trial_config(doc), ValidationError);
  doc = ConfigDocument::load(kConfigs / "trial.conf");
  doc.set("trial.timeout", "0");
  CHECK_THROWS_AS(make_trial_config(doc), ValidationError);
  doc = ConfigDocument::load(kConfigs / "trial.conf");
  doc.set("blend.mode", "autonomous");
  CHECK_THROWS_AS(make_trial_config(doc), ParseError);
}
