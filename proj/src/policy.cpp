#include "semroute/policy.hpp"

#include <chrono>
#include <random>
#include <sstream>

namespace semroute {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

std::string hex_prefix(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << value;
  return os.str();
}

// Resolves the route the decision forwards to: the matched winner, or the
// fallback (which may itself reference a configured route).
void resolve_route(const Snapshot& snap, const CategoryDecision& cd,
                   RoutingDecision& out) {
  const FallbackSpec& fb = snap.table.fallback();
  if (cd.matched) {
    const Route* route = snap.table.find_route(cd.category);
    out.category = cd.category;
    out.target_model = route->target_model;
    out.reasoning_mode = route->reasoning_mode;
    return;
  }
  out.category = fb.name;
  out.target_model = fb.target_model;
  out.reasoning_mode = fb.reasoning_mode;
}

}  // namespace

std::string_view guard_action_name(GuardAction action) {
  switch (action) {
    case GuardAction::Pass: return "pass";
    case GuardAction::Redact: return "redact";
    case GuardAction::Block: return "block";
  }
  return "pass";
}

nlohmann::json RoutingDecision::to_json() const {
  nlohmann::json stages = nlohmann::json::object();
  for (const StageRecord& s : trace) {
    stages[s.stage] = {{"duration_ms", s.duration_ms}, {"outcome", s.outcome}};
  }
  return {{"decision_id", decision_id},
          {"category", category},
          {"score", score},
          {"reasoning_mode", std::string(reasoning_mode_name(reasoning_mode))},
          {"guard_action", std::string(guard_action_name(guard_action))},
          {"stages", std::move(stages)}};
}

DecisionIdGenerator::DecisionIdGenerator() {
  std::random_device rd;
  prefix_ = hex_prefix((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
}

DecisionIdGenerator::DecisionIdGenerator(std::uint64_t seed)
    : prefix_(hex_prefix(seed)) {}

std::string DecisionIdGenerator::next() {
  return prefix_ + "-" + std::to_string(counter_.fetch_add(1));
}

RoutingDecision decide(const std::string& prompt, const Snapshot& snapshot,
                       DecisionIdGenerator& ids) {
  RoutingDecision decision;
  decision.decision_id = ids.next();

  bool pii_failed = false;
  bool jailbreak_failed = false;
  bool classify_failed = false;

  {
    const auto start = Clock::now();
    std::string outcome;
    try {
      decision.pii_spans = snapshot.pii.detect(prompt);
      outcome = "ok: " + std::to_string(decision.pii_spans.size()) + " spans";
    } catch (const std::exception& e) {
      pii_failed = true;
      outcome = std::string("error: ") + e.what();
    }
    decision.trace.push_back({"pii", elapsed_ms(start), std::move(outcome)});
  }

  {
    const auto start = Clock::now();
    std::string outcome;
    try {
      decision.jailbreak = snapshot.jailbreak.detect(prompt);
      outcome = decision.jailbreak.flagged ? "flagged" : "clear";
    } catch (const std::exception& e) {
      jailbreak_failed = true;
      outcome = std::string("error: ") + e.what();
    }
    decision.trace.push_back(
        {"jailbreak", elapsed_ms(start), std::move(outcome)});
  }

  {
    const auto start = Clock::now();
    std::string outcome;
    try {
      const Embedding embedding = snapshot.encoder->embed(prompt);
      decision.classification = snapshot.table.classify(embedding);
      outcome = "ok: " + decision.classification.argmax;
    } catch (const std::exception& e) {
      classify_failed = true;
      outcome = std::string("error: ") + e.what();
    }
    decision.trace.push_back(
        {"classify", elapsed_ms(start), std::move(outcome)});
  }

  {
    const auto start = Clock::now();
    decision.failed = pii_failed || jailbreak_failed || classify_failed;
    std::string outcome = "ok";

    if (decision.failed &&
        snapshot.config.policy.fail_mode == FailMode::Closed) {
      decision.guard_action = GuardAction::Block;
      decision.category = snapshot.table.fallback().name;
      decision.target_model.clear();
      outcome = "fail-closed: blocked";
    } else {
      if (classify_failed) {
        // Fail-open: route to the fallback with reasoning forced on.
        decision.category = snapshot.table.fallback().name;
        decision.target_model = snapshot.table.fallback().target_model;
        decision.reasoning_mode = ReasoningMode::On;
        outcome = "fail-open: fallback";
      } else {
        resolve_route(snapshot, decision.classification, decision);
        decision.score = decision.classification.score;
      }

      if (!jailbreak_failed && decision.jailbreak.flagged) {
        decision.guard_action = GuardAction::Block;
      } else if (!pii_failed && !decision.pii_spans.empty()) {
        switch (snapshot.config.guards.pii.action) {
          case PiiAction::Block:
            decision.guard_action = GuardAction::Block;
            break;
          case PiiAction::Redact:
            decision.guard_action = GuardAction::Redact;
            break;
          case PiiAction::Pass:
            decision.guard_action = GuardAction::Pass;
            break;
        }
      }
      if (decision.guard_action == GuardAction::Block) {
        decision.target_model.clear();
      }
    }
    decision.trace.push_back({"decide", elapsed_ms(start), std::move(outcome)});
  }

  return decision;
}

namespace {

void set_model(RequestEnvelope& env, const RoutingDecision& decision) {
  if (decision.target_model.empty()) return;
  env.doc["model"] = decision.target_model;
  env.model = decision.target_model;
}

void apply_field_toggle(RequestEnvelope& env, const MutationConfig& cfg,
                        bool enabled) {
  nlohmann::json* node = &env.doc;
  std::size_t start = 0;
  const std::string& path = cfg.field_path;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string segment =
        path.substr(start, dot == std::string::npos ? std::string::npos
                                                    : dot - start);
    if (dot == std::string::npos) {
      if (!node->is_object()) {
        throw MutationError("reasoning field path '" + path +
                            "' does not land in an object");
      }
      (*node)[segment] = enabled;
      return;
    }
    if (!node->is_object()) {
      throw MutationError("reasoning field path '" + path +
                          "' crosses a non-object value");
    }
    nlohmann::json& child = (*node)[segment];
    if (child.is_null()) child = nlohmann::json::object();
    if (!child.is_object()) {
      throw MutationError("reasoning field path '" + path +
                          "' crosses a non-object value at '" + segment + "'");
    }
    node = &child;
    start = dot + 1;
  }
}

void apply_system_prompt(RequestEnvelope& env, const MutationConfig& cfg,
                         ReasoningMode mode) {
  const std::string& text = mode == ReasoningMode::On ? cfg.system_prompt_on
                                                      : cfg.system_prompt_off;
  if (!env.messages.empty() && env.messages.front().role == "system" &&
      env.messages.front().content == text) {
    return;  // already applied
  }
  nlohmann::json msg = {{"role", "system"}, {"content", text}};
  auto& messages = env.doc["messages"];
  messages.insert(messages.begin(), std::move(msg));
  env.messages.insert(env.messages.begin(), {"system", text});
}

void apply_redaction(RequestEnvelope& env, const RoutingDecision& decision) {
  if (decision.pii_spans.empty()) return;
  // Spans index into the newline-joined user prompt; walk the messages with
  // a running offset and rewrite each user message with its own slice.
  std::size_t base = 0;
  bool first_user = true;
  for (std::size_t i = 0; i < env.messages.size(); ++i) {
    ChatMessage& msg = env.messages[i];
    if (msg.role != "user") continue;
    if (!first_user) ++base;  // joining newline
    first_user = false;
    const std::size_t begin = base;
    const std::size_t end = base + msg.content.size();
    std::vector<PiiSpan> local;
    for (const PiiSpan& span : decision.pii_spans) {
      if (span.start >= begin && span.end <= end) {
        PiiSpan shifted = span;
        shifted.start -= begin;
        shifted.end -= begin;
        // Stale spans (content already rewritten, e.g. a second
        // application of the same decision) are dropped.
        if (msg.content.compare(shifted.start, shifted.end - shifted.start,
                                shifted.matched_text) != 0) {
          continue;
        }
        local.push_back(std::move(shifted));
      }
    }
    if (!local.empty()) {
      msg.content = redact(msg.content, local);
      env.doc["messages"][i]["content"] = msg.content;
    }
    base = end;
  }
}

}  // namespace

RequestEnvelope mutate_request(const RequestEnvelope& request,
                               const RoutingDecision& decision,
                               const MutationConfig& config) {
  if (decision.guard_action == GuardAction::Block) {
    throw std::logic_error("mutate_request: BLOCK decisions are not mutated");
  }
  RequestEnvelope out = request;
  set_model(out, decision);
  if (config.strategy == MutationStrategy::Field) {
    apply_field_toggle(out, config,
                       decision.reasoning_mode == ReasoningMode::On);
  } else {
    apply_system_prompt(out, config, decision.reasoning_mode);
  }
  if (decision.guard_action == GuardAction::Redact) {
    apply_redaction(out, decision);
  }
  return out;
}

}  // namespace semroute
