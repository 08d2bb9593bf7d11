#include "semroute/bench/runner.hpp"

#include <set>

#include "semroute/policy.hpp"
#include "semroute/sim/simulator.hpp"

namespace semroute::bench {

namespace {

RequestEnvelope envelope_for(const BenchQuery& query) {
  nlohmann::json doc = {
      {"model", "bench"},
      {"messages",
       nlohmann::json::array({{{"role", "user"}, {"content", query.prompt}}})}};
  return RequestEnvelope::from_document(std::move(doc));
}

}  // namespace

MetricsReport run_bench(const std::vector<BenchQuery>& dataset,
                        const Snapshot& snapshot,
                        const sim::CostModel& cost_model,
                        const BenchOptions& options) {
  if (options.baselines.empty()) {
    throw DatasetError("run_bench: at least one baseline arm is required");
  }
  std::set<std::string> missing;
  for (const BenchQuery& q : dataset) {
    if (!cost_model.has_category(q.category)) missing.insert(q.category);
  }
  if (!missing.empty()) {
    std::string names;
    for (const std::string& m : missing) {
      if (!names.empty()) names += ", ";
      names += m;
    }
    throw DatasetError("dataset categories missing from cost model: " + names);
  }

  sim::CostModel model = cost_model;
  if (options.seed) model.set_seed(*options.seed);

  MetricsReport report;
  report.seed = model.seed();
  report.router.name = "router";
  for (const BaselineArm& arm : options.baselines) {
    ArmReport b;
    b.name = arm.name;
    report.baselines.push_back(std::move(b));
  }

  DecisionIdGenerator ids(model.seed());
  const MutationConfig& mutation = snapshot.config.mutation;

  for (const BenchQuery& query : dataset) {
    const RequestEnvelope envelope = envelope_for(query);

    // Router arm.
    const RoutingDecision decision = decide(query.prompt, snapshot, ids);
    CategoryStats& router_stats = report.router.per_category[query.category];
    if (decision.guard_action == GuardAction::Block) {
      router_stats.add(false, 0.0, 0.0);
    } else {
      const RequestEnvelope mutated =
          mutate_request(envelope, decision, mutation);
      const sim::SimResponse sim = sim::simulate(
          mutated, {query.category, decision.reasoning_mode, query.id}, model);
      router_stats.add(sim.answer_correct, sim.latency_ms,
                       static_cast<double>(sim.total_tokens));
    }

    // Fixed-mode arms reuse the same request id, so their draws couple
    // with the router arm's.
    for (std::size_t i = 0; i < options.baselines.size(); ++i) {
      const BaselineArm& arm = options.baselines[i];
      RoutingDecision fixed;
      fixed.decision_id = query.id;
      fixed.category = query.category;
      fixed.reasoning_mode = arm.mode;
      fixed.target_model = arm.model;
      fixed.guard_action = GuardAction::Pass;
      const RequestEnvelope mutated = mutate_request(envelope, fixed, mutation);
      const sim::SimResponse sim = sim::simulate(
          mutated, {query.category, arm.mode, query.id}, model);
      report.baselines[i].per_category[query.category].add(
          sim.answer_correct, sim.latency_ms,
          static_cast<double>(sim.total_tokens));
    }
  }

  for (auto& [name, stats] : report.router.per_category) {
    report.router.overall.merge(stats);
  }
  for (ArmReport& arm : report.baselines) {
    for (auto& [name, stats] : arm.per_category) {
      arm.overall.merge(stats);
    }
  }
  report.deltas = compute_deltas(triple_of(report.router.overall),
                                 triple_of(report.baselines[0].overall));
  return report;
}

}  // namespace semroute::bench
