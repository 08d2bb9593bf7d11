#include "semroute/sim/cost_model.hpp"

#include <fstream>
#include <sstream>

#include "semroute/config.hpp"

namespace semroute::sim {

namespace {

using nlohmann::json;

CostCell parse_cell(const json& j, const std::string& path) {
  if (!j.is_object()) {
    throw SimError(path + ": expected object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "mean_latency_ms" && it.key() != "mean_tokens" &&
        it.key() != "accuracy_prob") {
      throw SimError(path + "." + it.key() + ": unknown key");
    }
  }
  CostCell cell;
  const auto number = [&](const char* key) -> double {
    if (!j.contains(key) || !j[key].is_number()) {
      throw SimError(path + "." + key + ": required number");
    }
    return j[key].get<double>();
  };
  cell.mean_latency_ms = number("mean_latency_ms");
  cell.mean_tokens = number("mean_tokens");
  cell.accuracy_prob = number("accuracy_prob");
  if (cell.mean_latency_ms <= 0.0 || cell.mean_tokens <= 0.0) {
    throw SimError(path + ": means must be positive");
  }
  if (cell.accuracy_prob < 0.0 || cell.accuracy_prob > 1.0) {
    throw SimError(path + ".accuracy_prob: must be within [0,1]");
  }
  return cell;
}

}  // namespace

CostModel CostModel::parse(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SimError("cost model: expected object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() != "seed" && it.key() != "categories") {
      throw SimError("cost model: unknown key '" + it.key() + "'");
    }
  }
  std::uint64_t seed = 0;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer()) {
      throw SimError("seed: expected integer");
    }
    seed = doc["seed"].get<std::uint64_t>();
  }
  if (!doc.contains("categories") || !doc["categories"].is_object() ||
      doc["categories"].empty()) {
    throw SimError("categories: required non-empty object");
  }
  std::map<std::string, CategoryCosts> cells;
  for (auto it = doc["categories"].begin(); it != doc["categories"].end();
       ++it) {
    const std::string path = "categories." + it.key();
    const json& entry = it.value();
    if (!entry.is_object() || !entry.contains("on") ||
        !entry.contains("off")) {
      throw SimError(path + ": each category needs both 'on' and 'off' cells");
    }
    for (auto field = entry.begin(); field != entry.end(); ++field) {
      if (field.key() != "on" && field.key() != "off") {
        throw SimError(path + "." + field.key() + ": unknown key");
      }
    }
    CategoryCosts costs;
    costs.on = parse_cell(entry["on"], path + ".on");
    costs.off = parse_cell(entry["off"], path + ".off");
    cells.emplace(it.key(), costs);
  }
  return CostModel(seed, std::move(cells));
}

CostModel CostModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open cost model file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string ext = path.extension().string();
  json doc;
  if (ext == ".yaml" || ext == ".yml") {
    doc = yaml_to_json(buffer.str());
  } else if (ext == ".json") {
    try {
      doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
      throw SimError(path.string() + ": " + e.what());
    }
  } else {
    throw SimError(path.string() + ": unsupported extension '" + ext + "'");
  }
  return parse(doc);
}

const CostCell& CostModel::cell(const std::string& category,
                                ReasoningMode mode) const {
  const auto it = cells_.find(category);
  if (it == cells_.end()) {
    throw SimError("no cost cells for category '" + category + "'");
  }
  return mode == ReasoningMode::On ? it->second.on : it->second.off;
}

nlohmann::json CostModel::to_json() const {
  json categories = json::object();
  const auto cell_json = [](const CostCell& c) {
    return json{{"mean_latency_ms", c.mean_latency_ms},
                {"mean_tokens", c.mean_tokens},
                {"accuracy_prob", c.accuracy_prob}};
  };
  for (const auto& [name, costs] : cells_) {
    categories[name] = {{"on", cell_json(costs.on)},
                        {"off", cell_json(costs.off)}};
  }
  return {{"seed", seed_}, {"categories", std::move(categories)}};
}

}  // namespace semroute::sim
