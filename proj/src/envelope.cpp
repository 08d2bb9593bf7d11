#include "semroute/envelope.hpp"

namespace semroute {

RequestEnvelope RequestEnvelope::parse(std::string_view body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw RequestParseError(std::string("invalid JSON: ") + e.what());
  }
  return from_document(std::move(doc));
}

RequestEnvelope RequestEnvelope::from_document(nlohmann::json document) {
  if (!document.is_object()) {
    throw RequestParseError("request body must be a JSON object");
  }
  RequestEnvelope env;
  if (document.contains("model")) {
    if (!document["model"].is_string()) {
      throw RequestParseError("'model' must be a string");
    }
    env.model = document["model"].get<std::string>();
  }
  if (!document.contains("messages") || !document["messages"].is_array() ||
      document["messages"].empty()) {
    throw RequestParseError("'messages' must be a non-empty array");
  }
  for (const auto& m : document["messages"]) {
    if (!m.is_object() || !m.contains("role") || !m["role"].is_string() ||
        !m.contains("content") || !m["content"].is_string()) {
      throw RequestParseError(
          "each message needs a string 'role' and string 'content'");
    }
    const std::string role = m["role"].get<std::string>();
    if (role != "system" && role != "user" && role != "assistant") {
      throw RequestParseError("invalid message role '" + role + "'");
    }
    env.messages.push_back({role, m["content"].get<std::string>()});
  }
  env.doc = std::move(document);
  return env;
}

std::string RequestEnvelope::user_prompt() const {
  std::string prompt;
  bool first = true;
  for (const ChatMessage& m : messages) {
    if (m.role != "user") continue;
    if (!first) prompt.push_back('\n');
    prompt.append(m.content);
    first = false;
  }
  return prompt;
}

}  // namespace semroute
