#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "semroute/embedding.hpp"

namespace semroute {

enum class ReasoningMode { Off, On };

std::string_view reasoning_mode_name(ReasoningMode mode);  // "off" / "on"

/// How a route scores a prompt: against its centroid, or against the best
/// individual exemplar utterance.
enum class MatchPolicy { Centroid, MaxUtterance };

/// Configured (pre-build) route definition.
struct RouteSpec {
  std::string name;
  std::vector<std::string> utterances;
  double threshold = 0.10;
  std::string target_model;
  ReasoningMode reasoning_mode = ReasoningMode::Off;

  friend bool operator==(const RouteSpec&, const RouteSpec&) = default;
};

/// Where unmatched prompts go. Either a reference to a configured route or
/// an inline default. An empty target_model means "leave the request's
/// model untouched".
struct FallbackSpec {
  std::string name = "default";
  std::string target_model;
  ReasoningMode reasoning_mode = ReasoningMode::On;
  bool references_route = false;

  friend bool operator==(const FallbackSpec&, const FallbackSpec&) = default;
};

/// Built route: centroid is the L2-normalized mean of utterance embeddings.
struct Route {
  std::string name;
  std::vector<std::string> utterances;
  Embedding centroid;
  std::vector<Embedding> utterance_embeddings;
  double threshold = 0.10;
  std::string target_model;
  ReasoningMode reasoning_mode = ReasoningMode::Off;
};

struct CategoryDecision {
  std::string category;  // winner when matched, fallback name otherwise
  double score = 0.0;    // the argmax route's score in both cases
  bool matched = false;
  std::string argmax;    // raw best route, kept even when below threshold
  std::map<std::string, double> all_scores;
};

/// Immutable snapshot of the classification table. Build once, share
/// freely across request handlers; reload publishes a fresh instance.
class RouteTable {
 public:
  static RouteTable build(const std::vector<RouteSpec>& specs,
                          FallbackSpec fallback, MatchPolicy match_policy,
                          std::shared_ptr<const Encoder> encoder);

  /// Scores every route and picks the argmax, smallest name first on ties.
  /// The result is matched iff the winner clears its own threshold.
  /// Throws std::runtime_error on an empty table or std::invalid_argument
  /// on an embedding dimension mismatch.
  CategoryDecision classify(const Embedding& prompt_embedding) const;

  const std::vector<Route>& routes() const { return routes_; }
  const Route* find_route(std::string_view name) const;
  const FallbackSpec& fallback() const { return fallback_; }
  MatchPolicy match_policy() const { return match_policy_; }
  const Encoder& encoder() const { return *encoder_; }
  std::shared_ptr<const Encoder> encoder_ptr() const { return encoder_; }
  std::chrono::system_clock::time_point built_at() const { return built_at_; }

 private:
  RouteTable() = default;

  std::vector<Route> routes_;  // sorted by name
  FallbackSpec fallback_;
  MatchPolicy match_policy_ = MatchPolicy::Centroid;
  std::shared_ptr<const Encoder> encoder_;
  std::chrono::system_clock::time_point built_at_;
};

}  // namespace semroute
