#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace semroute {

class RequestParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

/// A chat-completion request. `doc` is the canonical document: every field
/// the caller sent stays in it untouched, and mutations write through it,
/// so unrecognized fields round-trip unchanged. `model` and `messages` are
/// extracted views kept in sync with `doc`.
struct RequestEnvelope {
  nlohmann::json doc;
  std::string model;
  std::vector<ChatMessage> messages;

  /// Parses and validates a request body. Requires a JSON object with a
  /// non-empty `messages` array of {role, content} pairs, role one of
  /// system|user|assistant, content a string. Throws RequestParseError.
  static RequestEnvelope parse(std::string_view body);

  static RequestEnvelope from_document(nlohmann::json document);

  /// User-role message contents, newline-joined, in order. This is the
  /// text routing decisions are made on.
  std::string user_prompt() const;

  std::string serialize() const { return doc.dump(); }
};

}  // namespace semroute
