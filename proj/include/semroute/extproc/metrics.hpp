#pragma once

#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "semroute/policy.hpp"

namespace semroute::extproc {

struct DecisionRecord {
  std::string decision_id;
  std::string category;
  double score = 0.0;
  ReasoningMode reasoning_mode = ReasoningMode::On;
  GuardAction guard_action = GuardAction::Pass;
};

/// Token usage observed on the response path; nullopt when the response
/// carried no parsable usage object.
struct UsageRecord {
  std::string decision_id;
  std::optional<long long> total_tokens;
};

/// Append-only, internally synchronized record of decisions and their
/// observed upstream usage.
class MetricsSink {
 public:
  void record_decision(const RoutingDecision& decision) {
    std::lock_guard lock(mutex_);
    decisions_.push_back({decision.decision_id, decision.category,
                          decision.score, decision.reasoning_mode,
                          decision.guard_action});
  }

  void record_usage(const std::string& decision_id,
                    std::optional<long long> total_tokens) {
    std::lock_guard lock(mutex_);
    usage_.push_back({decision_id, total_tokens});
  }

  std::vector<DecisionRecord> decisions() const {
    std::lock_guard lock(mutex_);
    return decisions_;
  }

  std::vector<UsageRecord> usage() const {
    std::lock_guard lock(mutex_);
    return usage_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<DecisionRecord> decisions_;
  std::vector<UsageRecord> usage_;
};

/// One JSON line per decision, flushed immediately.
class DecisionLog {
 public:
  explicit DecisionLog(std::ostream* out = nullptr) : out_(out) {}

  void write(const RoutingDecision& decision) {
    if (out_ == nullptr) return;
    const std::string line = decision.to_json().dump();
    std::lock_guard lock(mutex_);
    (*out_) << line << "\n";
    out_->flush();
  }

 private:
  std::mutex mutex_;
  std::ostream* out_;
};

}  // namespace semroute::extproc
