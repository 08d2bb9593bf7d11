#include "semroute/bench/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace semroute::bench {

namespace {

using nlohmann::json;

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, value);
  return buf;
}

// +0.0 for exact zeros so a zero-delta report never renders "-0.0".
double nonneg_zero(double v) { return v == 0.0 ? 0.0 : v; }

std::string accuracy_cell(double accuracy) {
  return fmt("%.2f", accuracy * 100.0) + "%";
}
std::string latency_cell(double latency_ms) {
  return fmt("%.2f", latency_ms / 1000.0);
}
std::string tokens_cell(double tokens) { return fmt("%.1f", tokens); }

json stats_to_json(const CategoryStats& s) {
  return {{"n", s.n},
          {"correct", s.correct},
          {"latency_ms_sum", s.latency_ms_sum},
          {"tokens_sum", s.tokens_sum},
          {"accuracy", s.accuracy()},
          {"mean_latency_ms", s.mean_latency_ms()},
          {"mean_tokens", s.mean_tokens()}};
}

CategoryStats stats_from_json(const json& j) {
  CategoryStats s;
  s.n = j.at("n").get<long long>();
  s.correct = j.at("correct").get<long long>();
  s.latency_ms_sum = j.at("latency_ms_sum").get<double>();
  s.tokens_sum = j.at("tokens_sum").get<double>();
  return s;
}

json arm_to_json(const ArmReport& arm) {
  json per_category = json::object();
  for (const auto& [name, stats] : arm.per_category) {
    per_category[name] = stats_to_json(stats);
  }
  return {{"name", arm.name},
          {"overall", stats_to_json(arm.overall)},
          {"per_category", std::move(per_category)}};
}

ArmReport arm_from_json(const json& j) {
  ArmReport arm;
  arm.name = j.at("name").get<std::string>();
  arm.overall = stats_from_json(j.at("overall"));
  for (auto it = j.at("per_category").begin(); it != j.at("per_category").end();
       ++it) {
    arm.per_category[it.key()] = stats_from_json(it.value());
  }
  return arm;
}

void per_category_table(std::ostringstream& os, const ArmReport& arm) {
  os << "## Per-category (" << arm.name << ")\n\n";
  os << "| Category | n | Accuracy | Mean latency (s) | Mean tokens |\n";
  os << "| --- | --- | --- | --- | --- |\n";
  for (const auto& [name, stats] : arm.per_category) {
    os << "| " << name << " | " << stats.n << " | "
       << accuracy_cell(stats.accuracy()) << " | "
       << latency_cell(stats.mean_latency_ms()) << " | "
       << tokens_cell(stats.mean_tokens()) << " |\n";
  }
  os << "\n";
}

}  // namespace

AggregateTriple triple_of(const CategoryStats& stats) {
  return {stats.accuracy(), stats.mean_latency_ms(), stats.mean_tokens()};
}

Deltas compute_deltas(const AggregateTriple& router,
                      const AggregateTriple& baseline) {
  Deltas d;
  d.accuracy_pp = (router.accuracy - baseline.accuracy) * 100.0;
  d.latency_pct = baseline.mean_latency_ms == 0.0
                      ? 0.0
                      : (baseline.mean_latency_ms - router.mean_latency_ms) /
                            baseline.mean_latency_ms;
  d.tokens_pct = baseline.mean_tokens == 0.0
                     ? 0.0
                     : (baseline.mean_tokens - router.mean_tokens) /
                           baseline.mean_tokens;
  return d;
}

MetricsReport report_from_aggregates(const AggregateTriple& router,
                                     const AggregateTriple& baseline,
                                     long long n) {
  const auto stats_from_triple = [n](const AggregateTriple& t) {
    CategoryStats s;
    s.n = n;
    s.correct = std::llround(t.accuracy * static_cast<double>(n));
    s.latency_ms_sum = t.mean_latency_ms * static_cast<double>(n);
    s.tokens_sum = t.mean_tokens * static_cast<double>(n);
    return s;
  };
  MetricsReport report;
  report.router.name = "router";
  report.router.overall = stats_from_triple(router);
  ArmReport base;
  base.name = "baseline";
  base.overall = stats_from_triple(baseline);
  report.baselines.push_back(std::move(base));
  report.deltas = compute_deltas(triple_of(report.router.overall),
                                 triple_of(report.baselines[0].overall));
  return report;
}

json MetricsReport::to_json() const {
  json baseline_array = json::array();
  for (const ArmReport& b : baselines) baseline_array.push_back(arm_to_json(b));
  return {{"seed", seed},
          {"router", arm_to_json(router)},
          {"baselines", std::move(baseline_array)},
          {"deltas",
           {{"accuracy_pp", deltas.accuracy_pp},
            {"latency_pct", deltas.latency_pct},
            {"tokens_pct", deltas.tokens_pct}}}};
}

MetricsReport MetricsReport::from_json(const json& doc) {
  MetricsReport report;
  report.seed = doc.at("seed").get<std::uint64_t>();
  report.router = arm_from_json(doc.at("router"));
  for (const json& b : doc.at("baselines")) {
    report.baselines.push_back(arm_from_json(b));
  }
  const json& d = doc.at("deltas");
  report.deltas.accuracy_pp = d.at("accuracy_pp").get<double>();
  report.deltas.latency_pct = d.at("latency_pct").get<double>();
  report.deltas.tokens_pct = d.at("tokens_pct").get<double>();
  return report;
}

std::string emit_markdown(const MetricsReport& report) {
  std::ostringstream os;
  os << "# Bench report\n\n";
  os << "seed: " << report.seed << "\n\n";
  os << "| Method | Avg. Accuracy | Avg. Latency (s) | Avg. Tokens |\n";
  os << "| --- | --- | --- | --- |\n";
  const auto arm_row = [&](const ArmReport& arm) {
    os << "| " << arm.name << " | " << accuracy_cell(arm.overall.accuracy())
       << " | " << latency_cell(arm.overall.mean_latency_ms()) << " | "
       << tokens_cell(arm.overall.mean_tokens()) << " |\n";
  };
  arm_row(report.router);
  for (const ArmReport& b : report.baselines) arm_row(b);
  if (!report.baselines.empty()) {
    os << "| **Improvement (" << report.router.name << " vs "
       << report.baselines[0].name << ")** | "
       << fmt("%+.2f", nonneg_zero(report.deltas.accuracy_pp)) << "pp | "
       << fmt("%+.1f", nonneg_zero(-report.deltas.latency_pct * 100.0))
       << "% | "
       << fmt("%+.1f", nonneg_zero(-report.deltas.tokens_pct * 100.0))
       << "% |\n";
  }
  os << "\n";
  if (!report.router.per_category.empty()) {
    per_category_table(os, report.router);
  }
  for (const ArmReport& b : report.baselines) {
    if (!b.per_category.empty()) per_category_table(os, b);
  }
  return os.str();
}

std::string emit_csv(const MetricsReport& report) {
  std::ostringstream os;
  const auto g17 = [](double v) { return fmt("%.17g", v); };
  os << "arm,category,n,accuracy,mean_latency_ms,mean_tokens\n";
  const auto arm_rows = [&](const ArmReport& arm) {
    os << arm.name << ",OVERALL," << arm.overall.n << ","
       << g17(arm.overall.accuracy()) << ","
       << g17(arm.overall.mean_latency_ms()) << ","
       << g17(arm.overall.mean_tokens()) << "\n";
    for (const auto& [name, stats] : arm.per_category) {
      os << arm.name << "," << name << "," << stats.n << ","
         << g17(stats.accuracy()) << "," << g17(stats.mean_latency_ms()) << ","
         << g17(stats.mean_tokens()) << "\n";
    }
  };
  arm_rows(report.router);
  for (const ArmReport& b : report.baselines) arm_rows(b);
  os << "deltas,accuracy_pp," << g17(report.deltas.accuracy_pp) << ",,,\n";
  os << "deltas,latency_pct," << g17(report.deltas.latency_pct) << ",,,\n";
  os << "deltas,tokens_pct," << g17(report.deltas.tokens_pct) << ",,,\n";
  return os.str();
}

std::string emit_json(const MetricsReport& report) {
  return report.to_json().dump(2) + "\n";
}

MetricsReport parse_report_json(const std::string& text) {
  return MetricsReport::from_json(json::parse(text));
}

std::string emit_report(const MetricsReport& report,
                        const std::string& format) {
  if (format == "markdown" || format == "md") return emit_markdown(report);
  if (format == "csv") return emit_csv(report);
  if (format == "json") return emit_json(report);
  throw std::invalid_argument("unknown report format '" + format +
                              "' (expected markdown, csv, or json)");
}

}  // namespace semroute::bench
