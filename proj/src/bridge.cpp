#include "scnav/bridge.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace scnav {

using nlohmann::json;

namespace {

[[noreturn]] void reject(const std::string& field, const std::string& what) { throw ParseError(1, field, what); }

double number_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) reject(key, "missing");
  if (!it->is_number()) reject(key, "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) reject(key, "not finite");
  return v;
}

void only_fields(const json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      reject(key, "unknown field");
  }
}

double round_mm(double v) { return std::round(v * 1000.0) / 1000.0; }

json twist_json(const Twist& t) { return {{"linear", t.linear}, {"angular", t.angular}}; }

json map_json(const ArenaMap& map) {
  json walls = json::array();
  for (const auto& w : map.wall_rects) walls.push_back({w.x0, w.y0, w.x1, w.y1});
  json obstacles = json::array();
  for (const auto& o : map.obstacles) {
    if (o.hidden) continue;
    if (const auto* c = std::get_if<Circle>(&o.shape)) {
      obstacles.push_back({{"circle", {c->center.x, c->center.y, c->radius}}});
    } else {
      json pts = json::array();
      for (const auto& v : std::get<ConvexPolygon>(o.shape).vertices) pts.push_back({v.x, v.y});
      obstacles.push_back({{"polygon", pts}});
    }
  }
  return {{"width", map.width},
          {"height", map.height},
          {"resolution", map.walls.resolution()},
          {"walls", walls},
          {"obstacles", obstacles}};
}

}  // namespace

CommandMessage decode_command(const std::string& text, const RobotSpec& robot) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    reject("", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) reject("", "expected an object");
  if (!j.contains("v") || !j["v"].is_number_integer() || j["v"].get<int>() != kProtocolVersion)
    reject("v", "unsupported protocol version");
  if (!j.contains("type") || !j["type"].is_string()) reject("type", "missing message type");

  CommandMessage msg;
  if (j.contains("t")) msg.client_time = number_field(j, "t");
  const std::string type = j["type"].get<std::string>();

  if (type == "twist") {
    only_fields(j, {"v", "type", "t", "linear", "angular"});
    const double lin = std::clamp(number_field(j, "linear"), -1.0, 1.0);
    const double ang = std::clamp(number_field(j, "angular"), -1.0, 1.0);
    msg.payload = TwistCommand{{lin * robot.v_max, ang * robot.w_max}};
  } else if (type == "config") {
    only_fields(j, {"v", "type", "t", "mode", "alpha"});
    ConfigCommand c;
    if (j.contains("mode")) {
      if (!j["mode"].is_string()) reject("mode", "expected a string");
      try {
        c.mode = parse_control_mode(j["mode"].get<std::string>());
      } catch (const ValidationError& e) {
        reject("mode", e.what());
      }
    }
    if (j.contains("alpha")) {
      const double a = number_field(j, "alpha");
      if (a < 0.0 || a > 1.0) throw ValidationError("alpha must lie in [0, 1]");
      c.alpha = a;
    }
    if (!c.mode && !c.alpha) reject("", "config message needs mode or alpha");
    msg.payload = c;
  } else if (type == "control") {
    only_fields(j, {"v", "type", "t", "action", "seed"});
    if (!j.contains("action") || !j["action"].is_string()) reject("action", "missing");
    const std::string action = j["action"].get<std::string>();
    ControlCommand c;
    if (action == "start") {
      c.action = ControlAction::Start;
    } else if (action == "reset") {
      c.action = ControlAction::Reset;
    } else if (action == "seed") {
      c.action = ControlAction::Seed;
    } else {
      reject("action", "unknown action '" + action + "'");
    }
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) reject("seed", "expected a non-negative integer");
      c.seed = j["seed"].get<std::uint64_t>();
    }
    if (c.action == ControlAction::Seed && !c.seed) reject("seed", "missing");
    if (c.action == ControlAction::Start && c.seed) reject("seed", "not allowed for start");
    msg.payload = c;
  } else {
    reject("type", "unknown message type '" + type + "'");
  }
  return msg;
}

std::string encode_error(const std::string& message) {
  return json{{"v", kProtocolVersion}, {"type", "error"}, {"message", message}}.dump();
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Idle: return "idle";
    case SessionStatus::Running: return "running";
    case SessionStatus::Completed: return "completed";
    case SessionStatus::TimedOut: return "timeout";
  }
  return "unknown";
}

std::vector<Vec2> scan_endpoints(const LaserScan& scan, const Pose2D& pose, std::size_t max_points) {
  std::vector<Vec2> hits;
  if (max_points == 0) return hits;
  const std::size_t n = scan.ranges.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + max_points - 1) / max_points);
  for (std::size_t i = 0; i < n; i += stride) {
    const double r = scan.ranges[i];
    if (!(r < scan.range_max)) continue;
    const double a = pose.theta + scan.beam_angle(i);
    hits.push_back({pose.x + r * std::cos(a), pose.y + r * std::sin(a)});
  }
  return hits;
}

std::string encode_state(const StateSnapshot& s, const ArenaMap* map) {
  json scan = json::array();
  for (const auto& p : s.scan_points) scan.push_back({round_mm(p.x), round_mm(p.y)});
  json blocked = json::array();
  for (auto b : s.blocked.blocked) blocked.push_back(b ? 1 : 0);
  json j = {{"v", kProtocolVersion},
            {"type", "state"},
            {"t", s.time},
            {"pose", {{"x", s.pose.x}, {"y", s.pose.y}, {"theta", s.pose.theta}}},
            {"goal", {{"x", s.goal.center.x}, {"y", s.goal.center.y}, {"radius", s.goal.radius}}},
            {"scan", scan},
            {"blocked", blocked},
            {"u_h", twist_json(s.u_h)},
            {"u_r", twist_json(s.u_r)},
            {"u_f", twist_json(s.u_f)},
            {"mode", std::string(to_string(s.mode))},
            {"alpha", s.alpha},
            {"collisions", s.collisions},
            {"status", std::string(to_string(s.status))},
            {"seed", s.seed}};
  if (map) j["map"] = map_json(*map);
  return j.dump();
}

StateThrottle::StateThrottle(double rate_hz) {
  if (!(rate_hz > 0.0)) throw ValidationError("ui rate must be positive");
  period_ = 1.0 / rate_hz;
}

bool StateThrottle::ready(double now) {
  if (last_ && now - *last_ < period_ - 1e-9) return false;
  last_ = now;
  return true;
}

// ---------------------------------------------------------------------------

BridgeSession::BridgeSession(TrialConfig config, std::optional<std::uint64_t> seed)
    : config_(std::move(config)), seed_(seed.value_or(config_.seed)), arbitration_(config_.arbitration) {
  config_.validate();
  rebuild();
}

void BridgeSession::rebuild() {
  sim_.reset();
  sim_.emplace(config_, trial_world(config_, seed_), arbitration_);
  status_ = SessionStatus::Idle;
  trace_ = CommandTrace{};
  metrics_.reset();
  replayable_ = true;
  pending_.reset();
  held_ = Twist{};
}

BridgeSession::ClientId BridgeSession::connect() {
  const ClientId id = next_id_++;
  clients_[id] = Client{};
  if (!steering_) steering_ = id;
  return id;
}

void BridgeSession::disconnect(ClientId id) {
  if (!clients_.erase(id)) return;
  if (steering_ != id) return;
  steering_.reset();
  pending_.reset();
  held_ = Twist{};
  if (!clients_.empty()) steering_ = clients_.begin()->first;
}

bool BridgeSession::needs_map(ClientId id) const {
  const auto it = clients_.find(id);
  return it != clients_.end() && !it->second.map_sent;
}

void BridgeSession::mark_map_sent(ClientId id) {
  const auto it = clients_.find(id);
  if (it != clients_.end()) it->second.map_sent = true;
}

std::optional<std::string> BridgeSession::handle_message(ClientId id, const std::string& text) {
  if (!is_connected(id)) return encode_error("unknown client");
  try {
    apply(id, decode_command(text, config_.robot));
  } catch (const std::exception& e) {
    return encode_error(e.what());
  }
  return std::nullopt;
}

void BridgeSession::apply(ClientId id, const CommandMessage& message) {
  if (steering_ != id) throw StateError("read-only client");
  if (const auto* t = std::get_if<TwistCommand>(&message.payload)) {
    if (pending_) ++dropped_;
    pending_ = t->cmd;
  } else if (const auto* c = std::get_if<ConfigCommand>(&message.payload)) {
    set_mode(c->mode.value_or(arbitration_.mode()), c->alpha);
  } else {
    const auto& ctl = std::get<ControlCommand>(message.payload);
    switch (ctl.action) {
      case ControlAction::Start: start(); break;
      case ControlAction::Reset:
      case ControlAction::Seed: reset(ctl.seed); break;
    }
  }
}

void BridgeSession::start() {
  if (status_ == SessionStatus::Idle) status_ = SessionStatus::Running;
}

void BridgeSession::reset(std::optional<std::uint64_t> seed) {
  if (seed) seed_ = *seed;
  rebuild();
}

void BridgeSession::set_mode(ControlMode mode, std::optional<double> alpha) {
  const ArbitrationConfig next = scnav::set_mode(arbitration_, mode, alpha);
  if (next == arbitration_) return;
  if (status_ != SessionStatus::Idle) replayable_ = false;
  arbitration_ = next;
  sim_->configure(arbitration_.mode(), arbitration_.alpha());
}

void BridgeSession::step() {
  if (status_ != SessionStatus::Running) return;
  if (pending_) {
    held_ = *pending_;
    pending_.reset();
  }
  trace_.record(sim_->time(), held_);
  sim_->tick(held_);
  if (sim_->status() == TrialStatus::Running) return;
  status_ = sim_->status() == TrialStatus::Completed ? SessionStatus::Completed : SessionStatus::TimedOut;
  TrialMetrics m;
  m.seed = seed_;
  m.mode = arbitration_.mode();
  m.timed_out = status_ == SessionStatus::TimedOut;
  m.completion_time = sim_->completion_time();
  m.collisions = sim_->world().collisions();
  m.path_length = sim_->world().path_length();
  metrics_ = m;
}

StateSnapshot BridgeSession::snapshot() const {
  StateSnapshot s;
  const Simulation& sim = *sim_;
  s.time = sim.time();
  s.pose = sim.world().pose();
  s.goal = sim.world().map().goal;
  s.scan_points = scan_endpoints(sim.scan(), s.pose);
  s.blocked = sim.last_frame().masked;
  s.u_h = sim.last_tick().u_h;
  s.u_r = sim.last_tick().u_r;
  s.u_f = sim.last_tick().u_f;
  s.mode = arbitration_.mode();
  s.alpha = arbitration_.alpha();
  s.collisions = sim.world().collisions();
  s.status = status_;
  s.seed = seed_;
  return s;
}

}  // namespace scnav
