#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "semroute/route_table.hpp"

namespace semroute::sim {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Expected backend behavior for one (category, reasoning mode) cell.
struct CostCell {
  double mean_latency_ms = 0.0;
  double mean_tokens = 0.0;
  double accuracy_prob = 0.0;

  friend bool operator==(const CostCell&, const CostCell&) = default;
};

struct CategoryCosts {
  CostCell off;
  CostCell on;

  friend bool operator==(const CategoryCosts&, const CategoryCosts&) = default;
};

/// Per-category/per-mode backend cost table plus the global seed that all
/// simulated randomness derives from.
class CostModel {
 public:
  CostModel() = default;
  CostModel(std::uint64_t seed, std::map<std::string, CategoryCosts> cells)
      : seed_(seed), cells_(std::move(cells)) {}

  /// Reads YAML (.yaml/.yml) or JSON (.json) keyed by category then mode.
  static CostModel load(const std::filesystem::path& path);
  static CostModel parse(const nlohmann::json& doc);

  const CostCell& cell(const std::string& category, ReasoningMode mode) const;
  bool has_category(const std::string& category) const {
    return cells_.count(category) != 0;
  }

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  const std::map<std::string, CategoryCosts>& cells() const { return cells_; }

  nlohmann::json to_json() const;

 private:
  std::uint64_t seed_ = 0;
  std::map<std::string, CategoryCosts> cells_;
};

}  // namespace semroute::sim
