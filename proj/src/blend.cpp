#include "scnav/blend.hpp"

#include <algorithm>
#include <cmath>

namespace scnav {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
}

// Convex combination, pinned to the closed interval between the inputs so
// rounding can never leave it.
double mix(double h, double r, double alpha) {
  const double v = alpha * h + (1.0 - alpha) * r;
  return std::clamp(v, std::min(h, r), std::max(h, r));
}

}  // namespace

std::string_view to_string(ControlMode mode) {
  return mode == ControlMode::Shared ? "shared" : "teleop";
}

ControlMode parse_control_mode(std::string_view text) {
  if (text == "shared") return ControlMode::Shared;
  if (text == "teleop" || text == "pure-teleop" || text == "pure_teleop") return ControlMode::PureTeleop;
  throw ValidationError("unknown control mode '" + std::string(text) + "'");
}

ArbitrationConfig::ArbitrationConfig(double alpha, ControlMode mode) : mode_(mode) { set_alpha(alpha); }

void ArbitrationConfig::set_alpha(double alpha) {
  check_alpha(alpha);
  alpha_ = alpha;
}

ArbitrationConfig set_mode(ArbitrationConfig config, ControlMode mode, std::optional<double> alpha) {
  if (alpha) config.set_alpha(*alpha);
  config.set_mode(mode);
  return config;
}

Twist blend(const Twist& u_h, const Twist& u_r, const ArbitrationConfig& config) {
  for (double v : {u_h.linear, u_h.angular, u_r.linear, u_r.angular})
    if (!std::isfinite(v)) throw ValidationError("blend: non-finite command component");
  if (config.mode() == ControlMode::PureTeleop) return u_h;
  const double a = config.alpha();
  return {mix(u_h.linear, u_r.linear, a), mix(u_h.angular, u_r.angular, a)};
}

double constant_arbitration(const ArbitrationContext&, const ArbitrationConfig& config) { return config.alpha(); }

Arbitrator::Arbitrator(ArbitrationConfig config, ArbitrationFunction fn) : config_(config), fn_(std::move(fn)) {}

void Arbitrator::configure(ControlMode mode, std::optional<double> alpha) { config_ = set_mode(config_, mode, alpha); }

Twist Arbitrator::operator()(const ArbitrationContext& ctx) const {
  const double alpha = fn_(ctx, config_);
  return blend(ctx.u_h, ctx.u_r, ArbitrationConfig(alpha, config_.mode()));
}

}  // namespace scnav
