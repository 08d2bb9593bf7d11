#pragma once

#include <memory>
#include <string>
#include <thread>

#include "semroute/sim/cost_model.hpp"

namespace semroute::sim {

struct SimServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;             // 0 picks an ephemeral port
  double time_scale = 1.0;  // multiplier on simulated delays before sleeping
};

/// Chat-completions-shaped HTTP stand-in for the real backend. Reads the
/// routing headers (x-semantic-category, x-reasoning-mode) or the reasoning
/// flag in the body, simulates the completion, sleeps the scaled latency,
/// and replies with the simulated body. Stateless per request; concurrent
/// requests never serialize on each other's delays.
class SimServer {
 public:
  SimServer(CostModel model, SimServerOptions options);
  ~SimServer();

  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  /// Binds and serves on a background thread. Returns false on bind
  /// failure. Blocks until the listener is accepting.
  bool start();
  void stop();

  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  CostModel model_;
  SimServerOptions options_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace semroute::sim
