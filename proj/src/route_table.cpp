#include "semroute/route_table.hpp"

#include <algorithm>
#include <stdexcept>

namespace semroute {

std::string_view reasoning_mode_name(ReasoningMode mode) {
  return mode == ReasoningMode::On ? "on" : "off";
}

RouteTable RouteTable::build(const std::vector<RouteSpec>& specs,
                             FallbackSpec fallback, MatchPolicy match_policy,
                             std::shared_ptr<const Encoder> encoder) {
  if (!encoder) {
    throw std::invalid_argument("RouteTable::build: null encoder");
  }
  RouteTable table;
  table.encoder_ = std::move(encoder);
  table.match_policy_ = match_policy;
  table.routes_.reserve(specs.size());

  for (const RouteSpec& spec : specs) {
    if (spec.utterances.empty()) {
      throw std::runtime_error("route '" + spec.name + "' has no utterances");
    }
    Route route;
    route.name = spec.name;
    route.utterances = spec.utterances;
    route.threshold = spec.threshold;
    route.target_model = spec.target_model;
    route.reasoning_mode = spec.reasoning_mode;
    route.utterance_embeddings.reserve(spec.utterances.size());
    bool any_nonzero = false;
    for (const std::string& u : spec.utterances) {
      Embedding e = table.encoder_->embed(u);
      any_nonzero = any_nonzero || !e.is_zero();
      route.utterance_embeddings.push_back(std::move(e));
    }
    if (!any_nonzero) {
      throw std::runtime_error("route '" + spec.name +
                               "' has no valid utterances (all empty after "
                               "tokenization)");
    }
    route.centroid = normalized_mean(route.utterance_embeddings);
    table.routes_.push_back(std::move(route));
  }

  std::sort(table.routes_.begin(), table.routes_.end(),
            [](const Route& a, const Route& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < table.routes_.size(); ++i) {
    if (table.routes_[i - 1].name == table.routes_[i].name) {
      throw std::runtime_error("duplicate route name '" +
                               table.routes_[i].name + "'");
    }
  }

  if (fallback.references_route) {
    bool found = false;
    for (const Route& r : table.routes_) found = found || r.name == fallback.name;
    if (!found) {
      throw std::runtime_error("fallback route '" + fallback.name +
                               "' does not exist");
    }
  }
  table.fallback_ = std::move(fallback);
  table.built_at_ = std::chrono::system_clock::now();
  return table;
}

const Route* RouteTable::find_route(std::string_view name) const {
  for (const Route& r : routes_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

CategoryDecision RouteTable::classify(const Embedding& prompt_embedding) const {
  if (routes_.empty()) {
    throw std::runtime_error("classify: route table is empty");
  }
  CategoryDecision decision;
  const Route* winner = nullptr;
  double winner_score = 0.0;
  for (const Route& route : routes_) {
    double score;
    if (match_policy_ == MatchPolicy::MaxUtterance) {
      score = -2.0;
      for (const Embedding& u : route.utterance_embeddings) {
        score = std::max(score, cosine(prompt_embedding, u));
      }
    } else {
      score = cosine(prompt_embedding, route.centroid);
    }
    decision.all_scores[route.name] = score;
    // Routes are name-sorted, so strict comparison keeps the
    // lexicographically smallest name on ties.
    if (winner == nullptr || score > winner_score) {
      winner = &route;
      winner_score = score;
    }
  }
  decision.argmax = winner->name;
  decision.score = winner_score;
  decision.matched = winner_score >= winner->threshold;
  decision.category = decision.matched ? winner->name : fallback_.name;
  return decision;
}

}  // namespace semroute
