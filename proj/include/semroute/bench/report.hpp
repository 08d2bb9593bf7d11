#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace semroute::bench {

/// Commutative per-category accumulator; merging is order-independent.
struct CategoryStats {
  long long n = 0;
  long long correct = 0;
  double latency_ms_sum = 0.0;
  double tokens_sum = 0.0;

  void add(bool answer_correct, double latency_ms, double tokens) {
    ++n;
    if (answer_correct) ++correct;
    latency_ms_sum += latency_ms;
    tokens_sum += tokens;
  }
  void merge(const CategoryStats& other) {
    n += other.n;
    correct += other.correct;
    latency_ms_sum += other.latency_ms_sum;
    tokens_sum += other.tokens_sum;
  }

  double accuracy() const { return n == 0 ? 0.0 : double(correct) / double(n); }
  double mean_latency_ms() const {
    return n == 0 ? 0.0 : latency_ms_sum / double(n);
  }
  double mean_tokens() const { return n == 0 ? 0.0 : tokens_sum / double(n); }

  friend bool operator==(const CategoryStats&, const CategoryStats&) = default;
};

struct ArmReport {
  std::string name;
  std::map<std::string, CategoryStats> per_category;
  CategoryStats overall;

  friend bool operator==(const ArmReport&, const ArmReport&) = default;
};

/// Improvement of the router over the baseline: accuracy in percentage
/// points, latency and tokens as fractional reductions of the baseline
/// (positive = router cheaper).
struct Deltas {
  double accuracy_pp = 0.0;
  double latency_pct = 0.0;
  double tokens_pct = 0.0;

  friend bool operator==(const Deltas&, const Deltas&) = default;
};

struct AggregateTriple {
  double accuracy = 0.0;
  double mean_latency_ms = 0.0;
  double mean_tokens = 0.0;
};

Deltas compute_deltas(const AggregateTriple& router,
                      const AggregateTriple& baseline);

AggregateTriple triple_of(const CategoryStats& stats);

struct MetricsReport {
  std::uint64_t seed = 0;
  ArmReport router;
  std::vector<ArmReport> baselines;  // first entry is the delta reference
  Deltas deltas;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& doc);

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Builds a two-arm report directly from aggregate triples (per-category
/// detail left empty), e.g. to render externally measured numbers.
MetricsReport report_from_aggregates(const AggregateTriple& router,
                                     const AggregateTriple& baseline,
                                     long long n = 10000);

std::string emit_markdown(const MetricsReport& report);
std::string emit_csv(const MetricsReport& report);
std::string emit_json(const MetricsReport& report);
MetricsReport parse_report_json(const std::string& text);

/// Renders `report` in the requested format: markdown, csv, or json.
std::string emit_report(const MetricsReport& report, const std::string& format);

}  // namespace semroute::bench
