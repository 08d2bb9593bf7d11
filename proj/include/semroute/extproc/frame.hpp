#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace semroute::extproc {

/// Torn, oversized, or otherwise un-framable input on a stream.
class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Upper bound on a single message; larger length prefixes are treated as
/// stream corruption rather than allocated.
constexpr std::size_t kMaxFrameBytes = 16u * 1024u * 1024u;

/// gRPC-style message framing: a zero compression flag byte, a 4-byte
/// big-endian payload length, then the payload.
///
/// Returns false on a clean end-of-stream at a frame boundary. Throws
/// FrameError on a nonzero flag, an oversized length, or EOF mid-frame.
bool read_frame(int fd, std::string* payload);

/// Writes one framed payload; throws FrameError on short writes or a
/// closed peer.
void write_frame(int fd, std::string_view payload);

}  // namespace semroute::extproc
