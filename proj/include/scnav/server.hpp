#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "scnav/bridge.hpp"

namespace scnav {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  double ui_rate = 2.5;
  std::optional<std::uint64_t> seed;
  std::filesystem::path output_dir;  // session records; empty disables
};

/// WebSocket front end for a BridgeSession. All session access happens on
/// the server's single I/O thread, driven by a real-time tick timer.
class BridgeServer {
 public:
  BridgeServer(TrialConfig config, ServerOptions options);
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  /// Binds and starts the I/O thread. Throws StateError when binding fails.
  void start();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();
  unsigned short port() const;
  bool running() const;

  /// Runs `fn` on the I/O thread and waits for it.
  void with_session(const std::function<void(BridgeSession&)>& fn);

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace scnav
