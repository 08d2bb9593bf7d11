#include "semroute/extproc/stream_handler.hpp"

#include <algorithm>

namespace semroute::extproc {

namespace pb = ::extproc::v3;

namespace {

std::string lower_ascii(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

std::string header_value(const pb::HeaderMap& headers, const std::string& key) {
  for (const pb::HeaderValue& h : headers.headers()) {
    if (lower_ascii(h.key()) != key) continue;
    if (!h.raw_value().empty()) return h.raw_value();
    return h.value();
  }
  return {};
}

void set_header(pb::HeaderMutation* mutation, const std::string& key,
                const std::string& value) {
  pb::HeaderValue* h = mutation->add_set_headers()->mutable_header();
  h->set_key(key);
  h->set_raw_value(value);
}

pb::ProcessingResponse immediate_response(int status_code,
                                          const nlohmann::json& body,
                                          const std::string& details) {
  pb::ProcessingResponse response;
  pb::ImmediateResponse* immediate = response.mutable_immediate_response();
  immediate->mutable_status()->set_code(status_code);
  immediate->set_body(body.dump());
  immediate->set_details(details);
  set_header(immediate->mutable_headers(), "content-type", "application/json");
  return response;
}

}  // namespace

StreamHandler::StreamHandler(const SnapshotHolder* snapshots,
                             MetricsSink* metrics, DecisionLog* log,
                             DecisionIdGenerator* ids)
    : snapshots_(snapshots), metrics_(metrics), log_(log), ids_(ids) {}

pb::ProcessingResponse StreamHandler::on_event(
    const pb::ProcessingRequest& event) {
  switch (event.request_case()) {
    case pb::ProcessingRequest::kRequestHeaders:
      return on_request_headers(event.request_headers());
    case pb::ProcessingRequest::kRequestBody:
      return on_request_body(event.request_body());
    case pb::ProcessingRequest::kResponseHeaders: {
      pb::ProcessingResponse response;
      response.mutable_response_headers();
      return response;
    }
    case pb::ProcessingRequest::kResponseBody:
      return on_response_body(event.response_body());
    case pb::ProcessingRequest::kRequestTrailers: {
      pb::ProcessingResponse response;
      response.mutable_request_trailers();
      return response;
    }
    case pb::ProcessingRequest::kResponseTrailers: {
      pb::ProcessingResponse response;
      response.mutable_response_trailers();
      return response;
    }
    case pb::ProcessingRequest::REQUEST_NOT_SET:
      break;
  }
  // Unknown phase: answer with an empty response so the stream never
  // stalls awaiting a reply.
  return pb::ProcessingResponse();
}

pb::ProcessingResponse StreamHandler::on_request_headers(
    const pb::HttpHeaders& headers) {
  saw_request_headers_ = true;
  snapshot_ = snapshots_->load();

  std::string path = header_value(headers.headers(), ":path");
  const std::string method = header_value(headers.headers(), ":method");
  if (const std::size_t q = path.find('?'); q != std::string::npos) {
    path.resize(q);
  }
  const bool chat_path =
      method == "POST" && path == "/v1/chat/completions";

  pb::ProcessingResponse response;
  response.mutable_request_headers()->mutable_response()->set_status(
      pb::CommonResponse::CONTINUE);
  pb::ProcessingMode* mode = response.mutable_mode_override();
  if (chat_path) {
    // Classification needs the whole prompt: ask for the buffered body.
    mode->set_request_body_mode(pb::ProcessingMode::BUFFERED);
    mode->set_response_body_mode(pb::ProcessingMode::BUFFERED);
  } else {
    pass_through_ = true;
    mode->set_request_body_mode(pb::ProcessingMode::NONE);
    mode->set_response_body_mode(pb::ProcessingMode::NONE);
    mode->set_response_header_mode(pb::ProcessingMode::SKIP);
    mode->set_request_trailer_mode(pb::ProcessingMode::SKIP);
    mode->set_response_trailer_mode(pb::ProcessingMode::SKIP);
  }
  return response;
}

pb::ProcessingResponse StreamHandler::on_request_body(
    const pb::HttpBody& body) {
  if (pass_through_ || !saw_request_headers_ || decided_) {
    pb::ProcessingResponse response;
    response.mutable_request_body()->mutable_response()->set_status(
        pb::CommonResponse::CONTINUE);
    return response;
  }
  request_body_.append(body.body());
  if (!body.end_of_stream()) {
    pb::ProcessingResponse response;
    response.mutable_request_body()->mutable_response()->set_status(
        pb::CommonResponse::CONTINUE);
    return response;
  }
  decided_ = true;
  return process_request(request_body_);
}

pb::ProcessingResponse StreamHandler::process_request(
    const std::string& body) {
  RequestEnvelope envelope;
  try {
    envelope = RequestEnvelope::parse(body);
  } catch (const RequestParseError& e) {
    return immediate_response(
        400, {{"error", {{"type", "bad_request"}, {"message", e.what()}}}},
        "request body rejected by semantic router");
  }

  const RoutingDecision decision =
      decide(envelope.user_prompt(), *snapshot_, *ids_);
  metrics_->record_decision(decision);
  if (log_ != nullptr) log_->write(decision);

  if (decision.guard_action == GuardAction::Block) {
    const char* reason =
        decision.jailbreak.flagged ? "jailbreak_detected" : "guard_policy";
    return immediate_response(
        403,
        {{"error",
          {{"type", "blocked"},
           {"reason", reason},
           {"decision_id", decision.decision_id},
           {"category", decision.category}}}},
        "blocked by semantic router");
  }

  RequestEnvelope mutated;
  try {
    mutated = mutate_request(envelope, decision, snapshot_->config.mutation);
  } catch (const MutationError& e) {
    return immediate_response(
        400, {{"error", {{"type", "mutation_failed"}, {"message", e.what()}}}},
        "request mutation failed");
  }

  decision_id_ = decision.decision_id;

  pb::ProcessingResponse response;
  pb::CommonResponse* common =
      response.mutable_request_body()->mutable_response();
  common->set_status(pb::CommonResponse::CONTINUE_AND_REPLACE);
  common->mutable_body_mutation()->set_body(mutated.serialize());
  pb::HeaderMutation* headers = common->mutable_header_mutation();
  set_header(headers, kCategoryHeader, decision.category);
  set_header(headers, kReasoningHeader,
             std::string(reasoning_mode_name(decision.reasoning_mode)));
  set_header(headers, kDecisionIdHeader, decision.decision_id);
  set_header(headers, kSelectedModelHeader, mutated.model);
  common->set_clear_route_cache(true);
  return response;
}

pb::ProcessingResponse StreamHandler::on_response_body(
    const pb::HttpBody& body) {
  pb::ProcessingResponse response;
  response.mutable_response_body()->mutable_response()->set_status(
      pb::CommonResponse::CONTINUE);
  if (pass_through_ || decision_id_.empty() || usage_recorded_) {
    return response;
  }
  response_body_.append(body.body());
  if (!body.end_of_stream()) return response;

  usage_recorded_ = true;
  std::optional<long long> tokens;
  const nlohmann::json parsed =
      nlohmann::json::parse(response_body_, nullptr, false);
  if (parsed.is_object() && parsed.contains("usage") &&
      parsed["usage"].is_object() &&
      parsed["usage"].contains("total_tokens") &&
      parsed["usage"]["total_tokens"].is_number_integer()) {
    tokens = parsed["usage"]["total_tokens"].get<long long>();
  }
  metrics_->record_usage(decision_id_, tokens);
  return response;
}

}  // namespace semroute::extproc
