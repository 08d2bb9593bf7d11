#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semroute/bench/dataset.hpp"
#include "semroute/bench/report.hpp"
#include "semroute/config.hpp"
#include "semroute/sim/cost_model.hpp"

namespace semroute::bench {

/// A fixed-mode comparison arm. An empty model string keeps each request's
/// original model.
struct BaselineArm {
  std::string name = "always-on";
  ReasoningMode mode = ReasoningMode::On;
  std::string model;
};

struct BenchOptions {
  std::optional<std::uint64_t> seed;  // overrides the cost model's seed
  std::vector<BaselineArm> baselines = {BaselineArm{}};
};

/// Runs every query through decide -> mutate -> simulate for the router arm
/// and through a fixed-mode mutate -> simulate for each baseline arm, then
/// aggregates per true category. Queries the router blocks count against
/// accuracy with zero cost. Fails up front if any dataset category has no
/// cost cells. Fully deterministic for a given (seed, dataset, config).
MetricsReport run_bench(const std::vector<BenchQuery>& dataset,
                        const Snapshot& snapshot,
                        const sim::CostModel& cost_model,
                        const BenchOptions& options);

}  // namespace semroute::bench
