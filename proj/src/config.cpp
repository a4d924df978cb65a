#include "scnav/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace scnav {

namespace {

const std::set<std::string>& list_keys() {
  static const std::set<std::string> keys{"wall", "obstacle", "waypoint"};
  return keys;
}

const std::set<std::string>& scalar_keys() {
  static const std::set<std::string> keys{
      "arena.width", "arena.height", "arena.resolution", "arena.start", "arena.goal",
      "robot.effective_radius", "robot.v_max", "robot.w_max", "robot.footprint_radius",
      "sensor.angle_min_deg", "sensor.angle_max_deg", "sensor.increment_deg", "sensor.range_max",
      "vfh.alpha_res_deg", "vfh.window_cells", "vfh.cell_size", "vfh.c_max", "vfh.a", "vfh.tau_high",
      "vfh.tau_low", "vfh.s_max", "vfh.mu1", "vfh.mu2", "vfh.mu3", "vfh.safety_factor",
      "vfh.safety_distance", "vfh.k_omega",
      "blend.alpha", "blend.mode",
      "operator.preset", "operator.gain", "operator.cruise_speed", "operator.overcorrection", "operator.noise_linear",
      "operator.noise_angular", "operator.observation_delay", "operator.frame_rate",
      "operator.decision_rate", "operator.capture_radius", "operator.avoid_distance",
      "operator.avoid_cone_deg", "operator.avoid_gain", "operator.caution_distance", "operator.route_clearance", "operator.memory_range", "operator.caution_speed", "operator.stuck_window", "operator.stuck_distance",
      "operator.recovery_time", "operator.recovery_speed", "operator.lookahead", "operator.guidance",
      "trial.command_delay", "trial.seed", "trial.timeout", "trial.dt",
      "obstacles.count", "obstacles.radius_min", "obstacles.radius_max", "obstacles.route_spread",
      "obstacles.keep_clear", "obstacles.max_retries",
      "bridge.ui_rate"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double to_double(const std::string& tok, int line, const std::string& key) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ParseError(line, key, "expected a number, got '" + tok + "'");
  return v;
}

std::vector<double> numbers(const ConfigDocument::Value& v, const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : split_ws(v.text)) out.push_back(to_double(tok, v.line, key));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void parse_into(ConfigDocument& doc, const std::string& text, const std::filesystem::path& base_dir, int depth,
                const std::function<void(const std::string&, const std::string&, int)>& emit) {
  if (depth > 8) throw ParseError(0, "include", "include nesting too deep");
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "", "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(lineno, "", "missing key");
    if (value.empty()) throw ParseError(lineno, key, "missing value");
    if (key == "include") {
      const std::filesystem::path p = base_dir / value;
      std::string inner;
      try {
        inner = read_file(p);
      } catch (const std::exception& e) {
        throw ParseError(lineno, key, e.what());
      }
      parse_into(doc, inner, p.parent_path(), depth + 1, emit);
      continue;
    }
    if (!list_keys().count(key) && !scalar_keys().count(key)) throw ParseError(lineno, key, "unknown key");
    emit(key, value, lineno);
  }
}

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text, const std::filesystem::path& base_dir) {
  ConfigDocument doc;
  parse_into(doc, text, base_dir, 0,
             [&](const std::string& k, const std::string& v, int line) { doc.merge_line(k, v, line); });
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.parent_path());
}

void ConfigDocument::merge_line(const std::string& key, const std::string& value, int line) {
  if (list_keys().count(key)) {
    lists_[key].push_back({value, line});
  } else {
    scalars_[key] = {value, line};
  }
}

bool ConfigDocument::has(const std::string& key) const { return scalars_.count(key) || lists_.count(key); }

const ConfigDocument::Value* ConfigDocument::find(const std::string& key) const {
  auto it = scalars_.find(key);
  return it == scalars_.end() ? nullptr : &it->second;
}

const std::vector<ConfigDocument::Value>& ConfigDocument::list(const std::string& key) const {
  static const std::vector<Value> empty;
  auto it = lists_.find(key);
  return it == lists_.end() ? empty : it->second;
}

void ConfigDocument::set(const std::string& key, const std::string& value) {
  if (!scalar_keys().count(key)) throw ParseError(0, key, "unknown key");
  scalars_[key] = {value, 0};
}

double ConfigDocument::get_double(const std::string& key, double fallback) const {
  const Value* v = find(key);
  return v ? to_double(trim(v->text), v->line, key) : fallback;
}

int ConfigDocument::get_int(const std::string& key, int fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  int out = 0;
  const std::string t = trim(v->text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw ParseError(v->line, key, "expected an integer, got '" + t + "'");
  return out;
}

std::string ConfigDocument::get_string(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  return v ? trim(v->text) : fallback;
}

std::vector<double> ConfigDocument::get_numbers(const std::string& key, std::size_t count) const {
  const Value* v = find(key);
  if (!v) throw ParseError(0, key, "required key missing");
  auto out = numbers(*v, key);
  if (out.size() != count)
    throw ParseError(v->line, key, "expected " + std::to_string(count) + " numbers, got " + std::to_string(out.size()));
  return out;
}

std::string ConfigDocument::canonical() const {
  std::string out;
  for (const auto& [k, v] : scalars_) out += k + " = " + trim(v.text) + "\n";
  for (const auto& [k, vs] : lists_)
    for (const auto& v : vs) out += k + " = " + trim(v.text) + "\n";
  return out;
}

// ---------------------------------------------------------------------------

ArenaMap load_arena(const ConfigDocument& doc) {
  const double width = doc.get_double("arena.width", 0.0);
  const double height = doc.get_double("arena.height", 0.0);
  if (!doc.find("arena.width") || !doc.find("arena.height"))
    throw ParseError(0, "arena.width", "arena.width and arena.height are required");
  if (!(width > 0.0)) throw ParseError(doc.find("arena.width")->line, "arena.width", "must be positive");
  if (!(height > 0.0)) throw ParseError(doc.find("arena.height")->line, "arena.height", "must be positive");
  const double res = doc.get_double("arena.resolution", 0.1);

  Pose2D start{width / 2.0, height / 2.0, 0.0};
  if (doc.find("arena.start")) {
    const auto s = doc.get_numbers("arena.start", 3);
    start = {s[0], s[1], deg2rad(s[2])};
  }
  GoalRegion goal{{width / 2.0, height / 2.0}, 0.5};
  if (doc.find("arena.goal")) {
    const auto g = doc.get_numbers("arena.goal", 3);
    goal = {{g[0], g[1]}, g[2]};
  } else {
    throw ParseError(0, "arena.goal", "required key missing");
  }

  std::vector<WallRect> walls;
  for (const auto& v : doc.list("wall")) {
    const auto n = numbers(v, "wall");
    if (n.size() != 4) throw ParseError(v.line, "wall", "expected 'x0 y0 x1 y1'");
    walls.push_back({n[0], n[1], n[2], n[3]});
  }
  std::vector<Obstacle> obstacles;
  for (const auto& v : doc.list("obstacle")) {
    const auto toks = split_ws(v.text);
    if (toks.empty()) throw ParseError(v.line, "obstacle", "missing shape");
    std::vector<double> n;
    for (std::size_t i = 1; i < toks.size(); ++i) n.push_back(to_double(toks[i], v.line, "obstacle"));
    if (toks[0] == "circle") {
      if (n.size() != 3 || !(n[2] > 0.0)) throw ParseError(v.line, "obstacle", "expected 'circle x y radius'");
      obstacles.push_back({Circle{{n[0], n[1]}, n[2]}, false});
    } else if (toks[0] == "polygon") {
      if (n.size() < 6 || n.size() % 2 != 0) throw ParseError(v.line, "obstacle", "polygon needs >= 3 x y pairs");
      ConvexPolygon poly;
      for (std::size_t i = 0; i < n.size(); i += 2) poly.vertices.push_back({n[i], n[i + 1]});
      double area2 = 0.0;
      for (std::size_t i = 0; i < poly.vertices.size(); ++i)
        area2 += poly.vertices[i].cross(poly.vertices[(i + 1) % poly.vertices.size()]);
      if (area2 < 0.0) std::reverse(poly.vertices.begin(), poly.vertices.end());
      obstacles.push_back({poly, false});
    } else {
      throw ParseError(v.line, "obstacle", "unknown shape '" + toks[0] + "'");
    }
  }
  std::vector<Vec2> route;
  for (const auto& v : doc.list("waypoint")) {
    const auto n = numbers(v, "waypoint");
    if (n.size() != 2) throw ParseError(v.line, "waypoint", "expected 'x y'");
    route.push_back({n[0], n[1]});
  }
  return make_arena(width, height, res, std::move(walls), std::move(obstacles), start, goal, std::move(route));
}

ArenaMap load_arena_text(const std::string& text) { return load_arena(ConfigDocument::parse(text)); }

void TrialConfig::validate() const {
  robot.validate();
  sensor.validate();
  vfh.validate();
  operator_policy.validate();
  if (!(timeout > 0.0)) throw ValidationError("trial: timeout must be positive");
  if (!(dt > 0.0)) throw ValidationError("trial: dt must be positive");
  if (command_delay < 0.0) throw ValidationError("trial: command delay must be >= 0");
  if (obstacles.count < 0) throw ValidationError("obstacles: count must be >= 0");
  if (!(obstacles.radius_min > 0.0) || obstacles.radius_max < obstacles.radius_min)
    throw ValidationError("obstacles: bad radius range");
  if (!(ui_rate > 0.0)) throw ValidationError("bridge: ui_rate must be positive");
  if (sensor.range_max < vfh.d_max()) throw ValidationError("sensor: range_max must cover the active window d_max");
  validate_arena(arena, robot);
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string TrialConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

TrialConfig make_trial_config(const ConfigDocument& doc) {
  TrialConfig c;
  c.arena = load_arena(doc);

  c.robot.effective_radius = doc.get_double("robot.effective_radius", c.robot.effective_radius);
  c.robot.v_max = doc.get_double("robot.v_max", c.robot.v_max);
  c.robot.w_max = doc.get_double("robot.w_max", c.robot.w_max);
  c.robot.footprint_radius = doc.get_double("robot.footprint_radius", c.robot.footprint_radius);

  c.sensor.angle_min = deg2rad(doc.get_double("sensor.angle_min_deg", rad2deg(c.sensor.angle_min)));
  c.sensor.angle_max = deg2rad(doc.get_double("sensor.angle_max_deg", rad2deg(c.sensor.angle_max)));
  c.sensor.angle_increment = deg2rad(doc.get_double("sensor.increment_deg", rad2deg(c.sensor.angle_increment)));
  c.sensor.range_max = doc.get_double("sensor.range_max", c.sensor.range_max);

  VfhParams& v = c.vfh;
  v.alpha_res = deg2rad(doc.get_double("vfh.alpha_res_deg", rad2deg(v.alpha_res)));
  v.window_cells = doc.get_int("vfh.window_cells", v.window_cells);
  v.cell_size = doc.get_double("vfh.cell_size", v.cell_size);
  v.c_max = doc.get_int("vfh.c_max", v.c_max);
  v.a = doc.get_double("vfh.a", v.a);
  v.tau_high = doc.get_double("vfh.tau_high", v.tau_high);
  v.tau_low = doc.get_double("vfh.tau_low", v.tau_low);
  v.s_max = doc.get_int("vfh.s_max", v.s_max);
  v.mu1 = doc.get_double("vfh.mu1", v.mu1);
  v.mu2 = doc.get_double("vfh.mu2", v.mu2);
  v.mu3 = doc.get_double("vfh.mu3", v.mu3);
  v.robot_radius = c.robot.effective_radius;
  v.safety_factor = doc.get_double("vfh.safety_factor", v.safety_factor);
  v.safety_distance = doc.get_double("vfh.safety_distance", v.safety_distance);
  v.k_omega = doc.get_double("vfh.k_omega", v.k_omega);

  const double alpha = doc.get_double("blend.alpha", 0.5);
  ControlMode mode = ControlMode::Shared;
  if (const auto* m = doc.find("blend.mode")) {
    try {
      mode = parse_control_mode(doc.get_string("blend.mode", "shared"));
    } catch (const ValidationError& e) {
      throw ParseError(m->line, "blend.mode", e.what());
    }
  }
  try {
    c.arbitration = ArbitrationConfig(alpha, mode);
  } catch (const ValidationError& e) {
    throw ParseError(doc.find("blend.alpha") ? doc.find("blend.alpha")->line : 0, "blend.alpha", e.what());
  }

  c.operator_preset = doc.get_string("operator.preset", c.operator_preset);
  try {
    c.operator_policy = operator_preset(c.operator_preset);
  } catch (const ValidationError& e) {
    throw ParseError(doc.find("operator.preset")->line, "operator.preset", e.what());
  }
  OperatorPolicy& p = c.operator_policy;
  p.gain = doc.get_double("operator.gain", p.gain);
  p.overcorrection = doc.get_double("operator.overcorrection", p.overcorrection);
  p.noise_linear = doc.get_double("operator.noise_linear", p.noise_linear);
  p.noise_angular = doc.get_double("operator.noise_angular", p.noise_angular);
  p.observation_delay = doc.get_double("operator.observation_delay", p.observation_delay);
  p.frame_rate = doc.get_double("operator.frame_rate", p.frame_rate);
  p.decision_rate = doc.get_double("operator.decision_rate", p.decision_rate);
  p.capture_radius = doc.get_double("operator.capture_radius", p.capture_radius);
  p.avoid_distance = doc.get_double("operator.avoid_distance", p.avoid_distance);
  p.avoid_cone = deg2rad(doc.get_double("operator.avoid_cone_deg", rad2deg(p.avoid_cone)));
  p.avoid_gain = doc.get_double("operator.avoid_gain", p.avoid_gain);
  p.cruise_speed = doc.get_double("operator.cruise_speed", p.cruise_speed);
  p.route_clearance = doc.get_double("operator.route_clearance", p.route_clearance);
  p.memory_range = doc.get_double("operator.memory_range", p.memory_range);
  p.caution_distance = doc.get_double("operator.caution_distance", p.caution_distance);
  p.caution_speed = doc.get_double("operator.caution_speed", p.caution_speed);
  p.stuck_window = doc.get_double("operator.stuck_window", p.stuck_window);
  p.stuck_distance = doc.get_double("operator.stuck_distance", p.stuck_distance);
  p.recovery_time = doc.get_double("operator.recovery_time", p.recovery_time);
  p.recovery_speed = doc.get_double("operator.recovery_speed", p.recovery_speed);
  p.lookahead = doc.get_double("operator.lookahead", p.lookahead);
  if (const auto* g = doc.find("operator.guidance")) {
    const std::string guidance = doc.get_string("operator.guidance", "map");
    if (guidance == "map") {
      c.operator_guidance = OperatorGuidance::Map;
    } else if (guidance == "waypoints") {
      c.operator_guidance = OperatorGuidance::Waypoints;
    } else {
      throw ParseError(g->line, "operator.guidance", "expected 'map' or 'waypoints'");
    }
  }
  p.v_max = c.robot.v_max;
  p.w_max = c.robot.w_max;
  p.waypoints = c.arena.route;
  if (p.waypoints.empty() || (p.waypoints.back() - c.arena.goal.center).norm() > 1e-9)
    p.waypoints.push_back(c.arena.goal.center);

  c.command_delay = doc.get_double("trial.command_delay", c.command_delay);
  const int seed = doc.get_int("trial.seed", 1);
  if (seed < 0) throw ParseError(doc.find("trial.seed")->line, "trial.seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.timeout = doc.get_double("trial.timeout", c.timeout);
  c.dt = doc.get_double("trial.dt", c.dt);

  c.obstacles.count = doc.get_int("obstacles.count", c.obstacles.count);
  c.obstacles.radius_min = doc.get_double("obstacles.radius_min", c.obstacles.radius_min);
  c.obstacles.radius_max = doc.get_double("obstacles.radius_max", c.obstacles.radius_max);
  c.obstacles.route_spread = doc.get_double("obstacles.route_spread", c.obstacles.route_spread);
  c.obstacles.keep_clear = doc.get_double("obstacles.keep_clear", c.obstacles.keep_clear);
  c.obstacles.max_retries = doc.get_int("obstacles.max_retries", c.obstacles.max_retries);

  c.ui_rate = doc.get_double("bridge.ui_rate", c.ui_rate);
  c.canonical = doc.canonical();
  c.validate();
  return c;
}

TrialConfig load_trial_config(const std::filesystem::path& path) {
  return make_trial_config(ConfigDocument::load(path));
}

}  // namespace scnav
