#include "semroute/extproc/frame.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace semroute::extproc {

namespace {

// Reads exactly n bytes. Returns the byte count actually read: n on
// success, 0 on immediate EOF, anything else is a torn read.
std::size_t read_exactly(int fd, char* buffer, std::size_t n) {
  std::size_t total = 0;
  while (total < n) {
    const ssize_t got = ::read(fd, buffer + total, n - total);
    if (got < 0) {
      if (errno == EINTR) continue;
      throw FrameError(std::string("read failed: ") + std::strerror(errno));
    }
    if (got == 0) break;
    total += static_cast<std::size_t>(got);
  }
  return total;
}

}  // namespace

bool read_frame(int fd, std::string* payload) {
  char header[5];
  const std::size_t got = read_exactly(fd, header, sizeof(header));
  if (got == 0) return false;  // clean end of stream
  if (got != sizeof(header)) {
    throw FrameError("stream ended inside a frame header");
  }
  if (header[0] != 0) {
    throw FrameError("unsupported frame flag");
  }
  const std::size_t length = (static_cast<std::size_t>(
                                  static_cast<unsigned char>(header[1]))
                              << 24) |
                             (static_cast<std::size_t>(
                                  static_cast<unsigned char>(header[2]))
                              << 16) |
                             (static_cast<std::size_t>(
                                  static_cast<unsigned char>(header[3]))
                              << 8) |
                             static_cast<std::size_t>(
                                 static_cast<unsigned char>(header[4]));
  if (length > kMaxFrameBytes) {
    throw FrameError("frame length " + std::to_string(length) +
                     " exceeds limit");
  }
  payload->resize(length);
  if (length > 0 && read_exactly(fd, payload->data(), length) != length) {
    throw FrameError("stream ended inside a frame payload");
  }
  return true;
}

void write_frame(int fd, std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) {
    throw FrameError("refusing to write oversized frame");
  }
  std::string buffer;
  buffer.reserve(payload.size() + 5);
  buffer.push_back('\0');
  buffer.push_back(static_cast<char>((payload.size() >> 24) & 0xFF));
  buffer.push_back(static_cast<char>((payload.size() >> 16) & 0xFF));
  buffer.push_back(static_cast<char>((payload.size() >> 8) & 0xFF));
  buffer.push_back(static_cast<char>(payload.size() & 0xFF));
  buffer.append(payload);

  std::size_t sent = 0;
  while (sent < buffer.size()) {
    const ssize_t n = ::send(fd, buffer.data() + sent, buffer.size() - sent,
                             MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw FrameError(std::string("write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

}  // namespace semroute::extproc
