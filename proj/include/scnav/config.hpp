#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scnav/blend.hpp"
#include "scnav/operator.hpp"
#include "scnav/vfh.hpp"
#include "scnav/world.hpp"

namespace scnav {

/// Parsed "key = value" document. Scalar keys keep their last assignment;
/// list keys (wall, obstacle, waypoint) accumulate. See docs/config_format.md.
class ConfigDocument {
 public:
  struct Value {
    std::string text;
    int line = 0;
  };

  /// `base_dir` resolves relative `include` paths.
  static ConfigDocument parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static ConfigDocument load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  const Value* find(const std::string& key) const;
  const std::vector<Value>& list(const std::string& key) const;
  /// Sets or replaces a scalar key (used for command-line overrides).
  void set(const std::string& key, const std::string& value);

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_numbers(const std::string& key, std::size_t count) const;

  /// Sorted, comment-free rendering; equal documents render identically.
  std::string canonical() const;

 private:
  void merge_line(const std::string& key, const std::string& value, int line);

  std::map<std::string, Value> scalars_;
  std::map<std::string, std::vector<Value>> lists_;
};

ArenaMap load_arena(const ConfigDocument& doc);
ArenaMap load_arena_text(const std::string& text);

struct ObstacleGenParams {
  int count = 0;
  double radius_min = 0.25;
  double radius_max = 0.5;
  double route_spread = 1.0;  // lateral scatter around the route; <= 0 samples the whole arena
  double keep_clear = 2.0;    // distance kept from start and goal
  int max_retries = 500;
};

/// How the scripted operator finds its way: a cost-to-goal field over the
/// prior map, or the listed waypoints only.
enum class OperatorGuidance { Map, Waypoints };

struct TrialConfig {
  ArenaMap arena;
  RobotSpec robot;
  SensorSpec sensor;
  VfhParams vfh;
  ArbitrationConfig arbitration;
  std::string operator_preset = "teleop_like";
  OperatorPolicy operator_policy;
  OperatorGuidance operator_guidance = OperatorGuidance::Map;
  double command_delay = 1.0;
  ObstacleGenParams obstacles;
  std::uint64_t seed = 1;
  double timeout = 600.0;
  double dt = 0.05;
  double ui_rate = 2.5;
  std::string canonical;  // canonical document text, for hashing

  void validate() const;
  std::string hash() const;
};

TrialConfig make_trial_config(const ConfigDocument& doc);
TrialConfig load_trial_config(const std::filesystem::path& path);

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace scnav
