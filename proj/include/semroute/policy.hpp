#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semroute/config.hpp"
#include "semroute/envelope.hpp"
#include "semroute/guards.hpp"
#include "semroute/route_table.hpp"

namespace semroute {

enum class GuardAction { Pass, Redact, Block };

std::string_view guard_action_name(GuardAction action);

struct StageRecord {
  std::string stage;
  double duration_ms = 0.0;
  std::string outcome;
};

/// The per-request resolution: what the guards found, where the prompt was
/// classified, and how the request must be rewritten.
struct RoutingDecision {
  std::string decision_id;
  std::string category;
  double score = 0.0;
  ReasoningMode reasoning_mode = ReasoningMode::On;
  std::string target_model;  // empty: leave the request's model untouched
  GuardAction guard_action = GuardAction::Pass;
  std::vector<PiiSpan> pii_spans;  // offsets into the joined user prompt
  JailbreakVerdict jailbreak;
  CategoryDecision classification;
  std::vector<StageRecord> trace;  // pii, jailbreak, classify, decide
  bool failed = false;             // some stage errored; fail-mode applied

  /// Structured decision-log line.
  nlohmann::json to_json() const;
};

/// Monotonic ids with a per-process (or seeded) prefix.
class DecisionIdGenerator {
 public:
  DecisionIdGenerator();
  explicit DecisionIdGenerator(std::uint64_t seed);

  std::string next();

 private:
  std::string prefix_;
  std::atomic<std::uint64_t> counter_{0};
};

/// Runs the guard and classification stages over the prompt and composes
/// them into one decision. Total: internal stage errors never escape; they
/// resolve per policy.fail_mode (open routes to the fallback with reasoning
/// on, closed blocks). Block takes precedence over redact regardless of
/// stage ordering, and classification always sees the original text.
RoutingDecision decide(const std::string& prompt, const Snapshot& snapshot,
                       DecisionIdGenerator& ids);

class MutationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Applies a non-BLOCK decision to a request: sets the model, applies the
/// reasoning toggle per the configured strategy, and for REDACT decisions
/// rewrites user message contents. Fields not named by the strategy are
/// preserved byte-meaning-identically. Applying the same decision twice is
/// a no-op on the second pass. Throws MutationError on a document the
/// strategy cannot mutate and std::logic_error for BLOCK decisions.
RequestEnvelope mutate_request(const RequestEnvelope& request,
                               const RoutingDecision& decision,
                               const MutationConfig& config);

}  // namespace semroute
