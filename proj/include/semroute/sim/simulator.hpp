#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "semroute/envelope.hpp"
#include "semroute/sim/cost_model.hpp"

namespace semroute::sim {

struct SimMeta {
  std::string category;
  ReasoningMode reasoning_mode = ReasoningMode::On;
  std::string request_id;
};

/// One simulated completion. `body` is a chat-completion-shaped document
/// with usage.total_tokens set; correctness and timing ride along in a
/// `router_sim` extension object.
struct SimResponse {
  bool answer_correct = false;
  long long total_tokens = 0;
  double latency_ms = 0.0;
  nlohmann::json body;
};

/// Deterministic per-request draw stream: every random quantity for a
/// request derives solely from hash(seed, request_id), so a request id
/// replays byte-identically and ON/OFF comparisons for the same id share
/// their jitter.
struct RequestDraws {
  double correctness;  // uniform [0,1)
  double token_jitter;    // uniform [0.8, 1.2)
  double latency_jitter;  // uniform [0.8, 1.2)
};

RequestDraws draws_for(std::uint64_t seed, std::string_view request_id);

/// Simulates one backend completion. Correctness is Bernoulli on the
/// cell's accuracy probability; tokens and latency are the cell means
/// scaled by the per-request jitter. Throws SimError when the category has
/// no cost cell.
SimResponse simulate(const RequestEnvelope& request, const SimMeta& meta,
                     const CostModel& model);

}  // namespace semroute::sim
