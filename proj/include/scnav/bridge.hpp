#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scnav/harness.hpp"

namespace scnav {

inline constexpr int kProtocolVersion = 1;

// Decoded operator input, already scaled to physical units.
struct TwistCommand {
  Twist cmd;
};

struct ConfigCommand {
  std::optional<ControlMode> mode;
  std::optional<double> alpha;
};

enum class ControlAction { Start, Reset, Seed };

struct ControlCommand {
  ControlAction action = ControlAction::Start;
  std::optional<std::uint64_t> seed;
};

struct CommandMessage {
  double client_time = 0.0;
  std::variant<TwistCommand, ConfigCommand, ControlCommand> payload;
};

/// Validates and decodes one client message. Twist axes are normalized,
/// clamped to [-1, 1] and scaled by the robot's limits. Throws ParseError on
/// malformed JSON, unknown type or unknown field, ValidationError on bad values.
CommandMessage decode_command(const std::string& text, const RobotSpec& robot);

std::string encode_error(const std::string& message);

enum class SessionStatus { Idle, Running, Completed, TimedOut };
std::string_view to_string(SessionStatus s);

struct StateSnapshot {
  double time = 0.0;
  Pose2D pose;
  GoalRegion goal;
  std::vector<Vec2> scan_points;  // world-frame beam endpoints that hit something
  SectorMask blocked;
  Twist u_h, u_r, u_f;
  ControlMode mode = ControlMode::Shared;
  double alpha = 0.5;
  int collisions = 0;
  SessionStatus status = SessionStatus::Idle;
  std::uint64_t seed = 0;
};

/// Canonical JSON. The prior map (walls and non-hidden obstacles) is attached
/// when `map` is given.
std::string encode_state(const StateSnapshot& snapshot, const ArenaMap* map = nullptr);

/// Endpoints of beams that hit, evenly decimated to at most max_points.
std::vector<Vec2> scan_endpoints(const LaserScan& scan, const Pose2D& pose, std::size_t max_points = 360);

/// Minimum spacing between emitted state messages.
class StateThrottle {
 public:
  explicit StateThrottle(double rate_hz);
  double period() const { return period_; }
  /// True (and arms the next slot) when a message may go out at `now`.
  bool ready(double now);
  void reset() { last_.reset(); }

 private:
  double period_;
  std::optional<double> last_;
};

/// Network-free live session: clients, steering authority, the simulation
/// and the session record. The server wraps this; tests drive it directly.
class BridgeSession {
 public:
  using ClientId = int;

  explicit BridgeSession(TrialConfig config, std::optional<std::uint64_t> seed = std::nullopt);

  ClientId connect();
  void disconnect(ClientId id);
  std::optional<ClientId> steering_client() const { return steering_; }
  bool is_connected(ClientId id) const { return clients_.count(id) != 0; }
  bool needs_map(ClientId id) const;
  void mark_map_sent(ClientId id);

  /// Handles one inbound text message. Returns an error reply to send back,
  /// if any.
  std::optional<std::string> handle_message(ClientId id, const std::string& text);
  void apply(ClientId id, const CommandMessage& message);

  void start();
  void reset(std::optional<std::uint64_t> seed = std::nullopt);
  void set_mode(ControlMode mode, std::optional<double> alpha = std::nullopt);

  /// One control period. No-op unless running.
  void step();

  SessionStatus status() const { return status_; }
  double time() const { return sim_->time(); }
  std::uint64_t seed() const { return seed_; }
  const Simulation& simulation() const { return *sim_; }
  const TrialConfig& config() const { return config_; }
  StateSnapshot snapshot() const;

  /// Issued commands recorded at tick timestamps.
  const CommandTrace& trace() const { return trace_; }
  /// Set once the trial ends.
  const std::optional<TrialMetrics>& metrics() const { return metrics_; }
  /// False once the mode or alpha changed after start; run_trial replays a
  /// single fixed arbitration.
  bool replayable() const { return replayable_; }
  std::size_t dropped_commands() const { return dropped_; }

 private:
  struct Client {
    bool map_sent = false;
  };

  void rebuild();

  TrialConfig config_;
  std::uint64_t seed_;
  ArbitrationConfig arbitration_;
  std::optional<Simulation> sim_;
  std::map<ClientId, Client> clients_;
  ClientId next_id_ = 1;
  std::optional<ClientId> steering_;
  std::optional<Twist> pending_;  // newest twist since the last tick
  Twist held_;
  SessionStatus status_ = SessionStatus::Idle;
  CommandTrace trace_;
  std::optional<TrialMetrics> metrics_;
  bool replayable_ = true;
  std::size_t dropped_ = 0;
};

}  // namespace scnav
