#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "scnav/types.hpp"

namespace scnav {

enum class ControlMode { PureTeleop, Shared };

std::string_view to_string(ControlMode mode);
ControlMode parse_control_mode(std::string_view text);

/// Blending coefficient and level of autonomy. alpha weights the operator:
/// U_f = alpha * U_h + (1 - alpha) * U_r.
class ArbitrationConfig {
 public:
  ArbitrationConfig() = default;
  ArbitrationConfig(double alpha, ControlMode mode);

  double alpha() const { return alpha_; }
  ControlMode mode() const { return mode_; }
  void set_alpha(double alpha);
  void set_mode(ControlMode mode) { mode_ = mode; }

  friend bool operator==(const ArbitrationConfig&, const ArbitrationConfig&) = default;

 private:
  double alpha_ = 0.5;
  ControlMode mode_ = ControlMode::Shared;
};

ArbitrationConfig set_mode(ArbitrationConfig config, ControlMode mode, std::optional<double> alpha = std::nullopt);

Twist blend(const Twist& u_h, const Twist& u_r, const ArbitrationConfig& config);

/// What an arbitration function may look at when choosing alpha.
struct ArbitrationContext {
  Twist u_h;
  Twist u_r;
  double blocked_fraction = 0.0;  // of the masked histogram
};

using ArbitrationFunction = std::function<double(const ArbitrationContext&, const ArbitrationConfig&)>;

/// Returns config.alpha() regardless of context.
double constant_arbitration(const ArbitrationContext&, const ArbitrationConfig& config);

class Arbitrator {
 public:
  explicit Arbitrator(ArbitrationConfig config = {}, ArbitrationFunction fn = constant_arbitration);

  const ArbitrationConfig& config() const { return config_; }
  void configure(ControlMode mode, std::optional<double> alpha = std::nullopt);
  Twist operator()(const ArbitrationContext& ctx) const;

 private:
  ArbitrationConfig config_;
  ArbitrationFunction fn_;
};

}  // namespace scnav
