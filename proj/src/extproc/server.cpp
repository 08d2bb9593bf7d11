#include "semroute/extproc/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>

#include "semroute/extproc/frame.hpp"
#include "semroute/extproc/stream_handler.hpp"

namespace semroute::extproc {

ExtProcServer::ExtProcServer(const SnapshotHolder* snapshots,
                             MetricsSink* metrics, DecisionLog* log,
                             GatewayOptions options)
    : snapshots_(snapshots),
      metrics_(metrics),
      log_(log),
      options_(std::move(options)) {}

ExtProcServer::~ExtProcServer() { stop(); }

bool ExtProcServer::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) return false;
  const int enable = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &enable, sizeof(enable));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(options_.port));
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    return false;
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
          0 ||
      ::listen(listen_fd_, 64) < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    return false;
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);

  accept_thread_ = std::thread([this] { accept_loop(); });
  return true;
}

void ExtProcServer::accept_loop() {
  while (!stopping_.load()) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listener closed
    }
    std::lock_guard lock(mutex_);
    if (stopping_.load()) {
      ::close(fd);
      break;
    }
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void ExtProcServer::serve_connection(int fd) {
  StreamHandler handler(snapshots_, metrics_, log_, &ids_);
  std::string payload;
  try {
    while (read_frame(fd, &payload)) {
      ::extproc::v3::ProcessingRequest event;
      if (!event.ParseFromString(payload)) {
        break;  // corrupt stream; drop only this connection
      }
      const ::extproc::v3::ProcessingResponse response =
          handler.on_event(event);
      write_frame(fd, response.SerializeAsString());
    }
  } catch (const FrameError&) {
    // Torn or corrupt stream: close this connection, others are isolated.
  } catch (const std::exception&) {
    // Never let one stream take down the server.
  }
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
  std::lock_guard lock(mutex_);
  open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd),
                  open_fds_.end());
}

void ExtProcServer::stop() {
  if (stopping_.exchange(true)) {
    if (accept_thread_.joinable()) accept_thread_.join();
    return;
  }
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  {
    std::lock_guard lock(mutex_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    workers.swap(workers_);
  }
  for (std::thread& w : workers) {
    if (w.joinable()) w.join();
  }
}

}  // namespace semroute::extproc
