#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "semroute/config.hpp"
#include "semroute/extproc/metrics.hpp"
#include "semroute/policy.hpp"

namespace semroute::extproc {

struct GatewayOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks an ephemeral port
};

/// TCP server speaking the external-processing message stream: one
/// connection carries one bidirectional stream of length-prefixed
/// ProcessingRequest/ProcessingResponse protobuf frames. Each connection
/// gets its own thread and StreamHandler; a malformed stream closes only
/// its own connection. Shared state is the snapshot holder and the
/// metrics sink, both internally synchronized.
class ExtProcServer {
 public:
  ExtProcServer(const SnapshotHolder* snapshots, MetricsSink* metrics,
                DecisionLog* log, GatewayOptions options);
  ~ExtProcServer();

  ExtProcServer(const ExtProcServer&) = delete;
  ExtProcServer& operator=(const ExtProcServer&) = delete;

  /// Binds and starts accepting on a background thread. Returns false on
  /// bind failure.
  bool start();
  void stop();

  int port() const { return port_; }

 private:
  void accept_loop();
  void serve_connection(int fd);

  const SnapshotHolder* snapshots_;
  MetricsSink* metrics_;
  DecisionLog* log_;
  GatewayOptions options_;
  DecisionIdGenerator ids_;

  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
};

}  // namespace semroute::extproc
