#pragma once

#include <string>

#include "extproc.pb.h"
#include "semroute/config.hpp"
#include "semroute/extproc/metrics.hpp"
#include "semroute/policy.hpp"

namespace semroute::extproc {

/// Emitted on every forwarded chat-completion request (bit-exact names).
inline constexpr const char* kCategoryHeader = "x-semantic-category";
inline constexpr const char* kReasoningHeader = "x-reasoning-mode";
inline constexpr const char* kDecisionIdHeader = "x-router-decision-id";
inline constexpr const char* kSelectedModelHeader = "x-selected-model";

/// Per-stream protocol state machine. Transport-independent: feed it
/// decoded ProcessingRequest events, send back whatever it returns. Every
/// event yields exactly one response. Routing state (the snapshot) is
/// pinned at the first request-headers event so one HTTP transaction never
/// straddles a config reload.
class StreamHandler {
 public:
  StreamHandler(const SnapshotHolder* snapshots, MetricsSink* metrics,
                DecisionLog* log, DecisionIdGenerator* ids);

  ::extproc::v3::ProcessingResponse on_event(
      const ::extproc::v3::ProcessingRequest& event);

 private:
  ::extproc::v3::ProcessingResponse on_request_headers(
      const ::extproc::v3::HttpHeaders& headers);
  ::extproc::v3::ProcessingResponse on_request_body(
      const ::extproc::v3::HttpBody& body);
  ::extproc::v3::ProcessingResponse on_response_body(
      const ::extproc::v3::HttpBody& body);

  ::extproc::v3::ProcessingResponse process_request(const std::string& body);

  const SnapshotHolder* snapshots_;
  MetricsSink* metrics_;
  DecisionLog* log_;
  DecisionIdGenerator* ids_;

  std::shared_ptr<const Snapshot> snapshot_;
  bool saw_request_headers_ = false;
  bool pass_through_ = false;
  bool decided_ = false;
  std::string request_body_;
  std::string response_body_;
  bool usage_recorded_ = false;
  std::string decision_id_;  // set only for forwarded (non-block) decisions
};

}  // namespace semroute::extproc
