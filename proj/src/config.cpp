#include "semroute/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <unordered_map>

namespace semroute {

namespace {

using nlohmann::json;

std::string json_type_name(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return "null";
    case json::value_t::object: return "object";
    case json::value_t::array: return "array";
    case json::value_t::string: return "string";
    case json::value_t::boolean: return "boolean";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float: return "number";
    default: return "unknown";
  }
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) {
      const std::string where =
          path.empty() ? it.key() : path + "." + it.key();
      throw ConfigError(where, "unknown key");
    }
  }
}

const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) {
    throw ConfigError(path, "expected object, got " + json_type_name(j));
  }
  return j;
}

std::string require_string(const json& j, const std::string& path) {
  if (!j.is_string()) {
    throw ConfigError(path, "expected string, got " + json_type_name(j));
  }
  return j.get<std::string>();
}

std::string require_nonempty_string(const json& j, const std::string& path) {
  std::string s = require_string(j, path);
  if (s.empty()) throw ConfigError(path, "must be a non-empty string");
  return s;
}

double require_unit_interval(const json& j, const std::string& path) {
  if (!j.is_number()) {
    throw ConfigError(path, "expected number, got " + json_type_name(j));
  }
  const double v = j.get<double>();
  if (!(v >= 0.0 && v <= 1.0)) {
    std::ostringstream os;
    os << "must be within [0,1] (got " << v << ")";
    throw ConfigError(path, os.str());
  }
  return v;
}

ReasoningMode require_reasoning_mode(const json& j, const std::string& path) {
  // YAML 1.1 readers may hand us a boolean for bare on/off.
  if (j.is_boolean()) {
    return j.get<bool>() ? ReasoningMode::On : ReasoningMode::Off;
  }
  const std::string s = require_string(j, path);
  if (s == "on") return ReasoningMode::On;
  if (s == "off") return ReasoningMode::Off;
  throw ConfigError(path, "expected \"on\" or \"off\" (got \"" + s + "\")");
}

std::vector<std::string> require_string_array(const json& j,
                                              const std::string& path) {
  if (!j.is_array()) {
    throw ConfigError(path, "expected array, got " + json_type_name(j));
  }
  std::vector<std::string> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(require_string(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

EncoderConfig parse_encoder(const json& j) {
  EncoderConfig cfg;
  require_object(j, "encoder");
  check_keys(j, "encoder", {"kind", "dimension"});
  if (j.contains("kind")) {
    cfg.kind = require_nonempty_string(j["kind"], "encoder.kind");
  }
  if (j.contains("dimension")) {
    const json& d = j["dimension"];
    if (!d.is_number_integer() || d.get<long long>() <= 0) {
      throw ConfigError("encoder.dimension", "expected positive integer");
    }
    cfg.dimension = d.get<std::size_t>();
  }
  try {
    make_encoder(cfg.kind, cfg.dimension);
  } catch (const std::exception& e) {
    throw ConfigError("encoder.kind", e.what());
  }
  return cfg;
}

std::vector<RouteSpec> parse_routes(const json& j) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError("routes", "expected non-empty array of routes");
  }
  std::vector<RouteSpec> routes;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "routes[" + std::to_string(i) + "]";
    const json& r = require_object(j[i], path);
    check_keys(r, path,
               {"name", "utterances", "threshold", "target_model",
                "reasoning_mode"});
    RouteSpec spec;
    if (!r.contains("name")) throw ConfigError(path + ".name", "required");
    spec.name = require_nonempty_string(r["name"], path + ".name");
    const auto [it, inserted] = seen.emplace(spec.name, i);
    if (!inserted) {
      throw ConfigError("routes", "duplicate route name '" + spec.name +
                                      "' (routes[" +
                                      std::to_string(it->second) +
                                      "].name and " + path + ".name)");
    }
    if (!r.contains("utterances")) {
      throw ConfigError(path + ".utterances", "required");
    }
    spec.utterances =
        require_string_array(r["utterances"], path + ".utterances");
    if (spec.utterances.empty()) {
      throw ConfigError(path + ".utterances", "must be non-empty");
    }
    bool any_tokens = false;
    for (const std::string& u : spec.utterances) {
      any_tokens = any_tokens || !tokenize(u).empty();
    }
    if (!any_tokens) {
      throw ConfigError(path + ".utterances",
                        "route '" + spec.name +
                            "' has no valid utterances (all empty after "
                            "tokenization)");
    }
    if (r.contains("threshold")) {
      spec.threshold =
          require_unit_interval(r["threshold"], path + ".threshold");
    }
    if (!r.contains("target_model")) {
      throw ConfigError(path + ".target_model", "required");
    }
    spec.target_model =
        require_nonempty_string(r["target_model"], path + ".target_model");
    if (!r.contains("reasoning_mode")) {
      throw ConfigError(path + ".reasoning_mode", "required");
    }
    spec.reasoning_mode =
        require_reasoning_mode(r["reasoning_mode"], path + ".reasoning_mode");
    routes.push_back(std::move(spec));
  }
  return routes;
}

GuardConfig parse_guards(const json& j) {
  GuardConfig cfg;
  require_object(j, "guards");
  check_keys(j, "guards", {"pii", "jailbreak"});
  if (j.contains("pii")) {
    const json& p = require_object(j["pii"], "guards.pii");
    check_keys(p, "guards.pii", {"action", "custom"});
    if (p.contains("action")) {
      const std::string a = require_string(p["action"], "guards.pii.action");
      if (a == "pass") {
        cfg.pii.action = PiiAction::Pass;
      } else if (a == "redact") {
        cfg.pii.action = PiiAction::Redact;
      } else if (a == "block") {
        cfg.pii.action = PiiAction::Block;
      } else {
        throw ConfigError("guards.pii.action",
                          "expected pass|redact|block (got \"" + a + "\")");
      }
    }
    if (p.contains("custom")) {
      const json& c = p["custom"];
      if (!c.is_array()) {
        throw ConfigError("guards.pii.custom", "expected array");
      }
      for (std::size_t i = 0; i < c.size(); ++i) {
        const std::string path = "guards.pii.custom[" + std::to_string(i) + "]";
        const json& rule = require_object(c[i], path);
        check_keys(rule, path, {"kind", "pattern"});
        CustomPiiRule out;
        if (!rule.contains("kind")) throw ConfigError(path + ".kind", "required");
        out.kind = require_nonempty_string(rule["kind"], path + ".kind");
        if (!rule.contains("pattern")) {
          throw ConfigError(path + ".pattern", "required");
        }
        out.pattern =
            require_nonempty_string(rule["pattern"], path + ".pattern");
        try {
          std::regex probe(out.pattern, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
          throw ConfigError(path + ".pattern",
                            std::string("invalid regex: ") + e.what());
        }
        cfg.pii.custom.push_back(std::move(out));
      }
    }
  }
  if (j.contains("jailbreak")) {
    const json& b = require_object(j["jailbreak"], "guards.jailbreak");
    check_keys(b, "guards.jailbreak", {"threshold", "exemplars", "blocklist"});
    if (b.contains("threshold")) {
      cfg.jailbreak.threshold =
          require_unit_interval(b["threshold"], "guards.jailbreak.threshold");
    }
    if (b.contains("exemplars")) {
      cfg.jailbreak.exemplars =
          require_string_array(b["exemplars"], "guards.jailbreak.exemplars");
    }
    if (b.contains("blocklist")) {
      cfg.jailbreak.blocklist =
          require_string_array(b["blocklist"], "guards.jailbreak.blocklist");
    }
  }
  return cfg;
}

MutationConfig parse_mutation(const json& j) {
  MutationConfig cfg;
  require_object(j, "mutation");
  check_keys(j, "mutation",
             {"strategy", "field_path", "system_prompt_on",
              "system_prompt_off"});
  if (j.contains("strategy")) {
    const std::string s = require_string(j["strategy"], "mutation.strategy");
    if (s == "field") {
      cfg.strategy = MutationStrategy::Field;
    } else if (s == "system_prompt") {
      cfg.strategy = MutationStrategy::SystemPrompt;
    } else {
      throw ConfigError("mutation.strategy",
                        "expected field|system_prompt (got \"" + s + "\")");
    }
  }
  if (j.contains("field_path")) {
    cfg.field_path =
        require_nonempty_string(j["field_path"], "mutation.field_path");
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = cfg.field_path.find('.', start);
      const std::size_t len =
          (dot == std::string::npos ? cfg.field_path.size() : dot) - start;
      if (len == 0) {
        throw ConfigError("mutation.field_path",
                          "empty segment in dotted path");
      }
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
  }
  if (j.contains("system_prompt_on")) {
    cfg.system_prompt_on = require_nonempty_string(j["system_prompt_on"],
                                                   "mutation.system_prompt_on");
  }
  if (j.contains("system_prompt_off")) {
    cfg.system_prompt_off = require_nonempty_string(
        j["system_prompt_off"], "mutation.system_prompt_off");
  }
  return cfg;
}

}  // namespace

std::string_view pii_action_name(PiiAction action) {
  switch (action) {
    case PiiAction::Pass: return "pass";
    case PiiAction::Redact: return "redact";
    case PiiAction::Block: return "block";
  }
  return "redact";
}

RoutingConfig parse_config(const nlohmann::json& doc) {
  RoutingConfig cfg;
  require_object(doc, "");
  check_keys(doc, "",
             {"encoder", "match", "routes", "fallback", "policy", "guards",
              "mutation"});

  if (doc.contains("encoder")) cfg.encoder = parse_encoder(doc["encoder"]);

  if (doc.contains("match")) {
    const std::string m = require_string(doc["match"], "match");
    if (m == "centroid") {
      cfg.match = MatchPolicy::Centroid;
    } else if (m == "max_utterance") {
      cfg.match = MatchPolicy::MaxUtterance;
    } else {
      throw ConfigError("match",
                        "expected centroid|max_utterance (got \"" + m + "\")");
    }
  }

  if (!doc.contains("routes")) throw ConfigError("routes", "required");
  cfg.routes = parse_routes(doc["routes"]);

  std::string fallback_route_ref;
  if (doc.contains("policy")) {
    const json& p = require_object(doc["policy"], "policy");
    check_keys(p, "policy", {"fallback_route", "fail_mode"});
    if (p.contains("fallback_route")) {
      fallback_route_ref =
          require_nonempty_string(p["fallback_route"], "policy.fallback_route");
    }
    if (p.contains("fail_mode")) {
      const std::string m = require_string(p["fail_mode"], "policy.fail_mode");
      if (m == "open") {
        cfg.policy.fail_mode = FailMode::Open;
      } else if (m == "closed") {
        cfg.policy.fail_mode = FailMode::Closed;
      } else {
        throw ConfigError("policy.fail_mode",
                          "expected open|closed (got \"" + m + "\")");
      }
    }
  }

  if (doc.contains("fallback") && !fallback_route_ref.empty()) {
    throw ConfigError("fallback",
                      "cannot set both fallback and policy.fallback_route");
  }
  if (!fallback_route_ref.empty()) {
    const RouteSpec* ref = nullptr;
    for (const RouteSpec& r : cfg.routes) {
      if (r.name == fallback_route_ref) ref = &r;
    }
    if (ref == nullptr) {
      throw ConfigError("policy.fallback_route",
                        "route '" + fallback_route_ref + "' does not exist");
    }
    cfg.fallback.name = ref->name;
    cfg.fallback.target_model = ref->target_model;
    cfg.fallback.reasoning_mode = ref->reasoning_mode;
    cfg.fallback.references_route = true;
  } else if (doc.contains("fallback")) {
    const json& f = require_object(doc["fallback"], "fallback");
    check_keys(f, "fallback", {"name", "target_model", "reasoning_mode"});
    if (f.contains("name")) {
      cfg.fallback.name = require_nonempty_string(f["name"], "fallback.name");
    }
    if (f.contains("target_model")) {
      cfg.fallback.target_model =
          require_string(f["target_model"], "fallback.target_model");
    }
    if (f.contains("reasoning_mode")) {
      cfg.fallback.reasoning_mode =
          require_reasoning_mode(f["reasoning_mode"], "fallback.reasoning_mode");
    }
    cfg.fallback.references_route = false;
  }
  if (!cfg.fallback.references_route) {
    for (const RouteSpec& r : cfg.routes) {
      if (r.name == cfg.fallback.name) {
        throw ConfigError("fallback.name",
                          "inline fallback name collides with route '" +
                              r.name + "'; use policy.fallback_route instead");
      }
    }
  }

  if (doc.contains("guards")) cfg.guards = parse_guards(doc["guards"]);
  if (doc.contains("mutation")) cfg.mutation = parse_mutation(doc["mutation"]);
  return cfg;
}

nlohmann::json RoutingConfig::to_json() const {
  json doc;
  doc["encoder"] = {{"kind", encoder.kind}, {"dimension", encoder.dimension}};
  doc["match"] =
      match == MatchPolicy::Centroid ? "centroid" : "max_utterance";
  json route_array = json::array();
  for (const RouteSpec& r : routes) {
    route_array.push_back({{"name", r.name},
                           {"utterances", r.utterances},
                           {"threshold", r.threshold},
                           {"target_model", r.target_model},
                           {"reasoning_mode",
                            std::string(reasoning_mode_name(r.reasoning_mode))}});
  }
  doc["routes"] = std::move(route_array);
  json policy_obj = {{"fail_mode",
                      policy.fail_mode == FailMode::Open ? "open" : "closed"}};
  if (fallback.references_route) {
    policy_obj["fallback_route"] = fallback.name;
  } else {
    doc["fallback"] = {
        {"name", fallback.name},
        {"target_model", fallback.target_model},
        {"reasoning_mode",
         std::string(reasoning_mode_name(fallback.reasoning_mode))}};
  }
  doc["policy"] = std::move(policy_obj);
  json custom = json::array();
  for (const CustomPiiRule& rule : guards.pii.custom) {
    custom.push_back({{"kind", rule.kind}, {"pattern", rule.pattern}});
  }
  doc["guards"] = {
      {"pii",
       {{"action", std::string(pii_action_name(guards.pii.action))},
        {"custom", std::move(custom)}}},
      {"jailbreak",
       {{"threshold", guards.jailbreak.threshold},
        {"exemplars", guards.jailbreak.exemplars},
        {"blocklist", guards.jailbreak.blocklist}}}};
  doc["mutation"] = {
      {"strategy",
       mutation.strategy == MutationStrategy::Field ? "field" : "system_prompt"},
      {"field_path", mutation.field_path},
      {"system_prompt_on", mutation.system_prompt_on},
      {"system_prompt_off", mutation.system_prompt_off}};
  return doc;
}

nlohmann::json yaml_to_json(const std::string& yaml_text) {
  struct Converter {
    static json convert(const YAML::Node& node) {
      switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
          return nullptr;
        case YAML::NodeType::Sequence: {
          json arr = json::array();
          for (const auto& item : node) arr.push_back(convert(item));
          return arr;
        }
        case YAML::NodeType::Map: {
          json obj = json::object();
          for (const auto& kv : node) {
            obj[kv.first.as<std::string>()] = convert(kv.second);
          }
          return obj;
        }
        case YAML::NodeType::Scalar:
          return scalar(node);
      }
      return nullptr;
    }

    // YAML 1.2 core-schema style: only canonical literals become typed
    // values, so bare on/off/yes/no survive as strings.
    static json scalar(const YAML::Node& node) {
      const std::string& s = node.Scalar();
      if (node.Tag() == "!") return s;  // quoted in the source
      if (s == "null" || s == "~" || s.empty()) return nullptr;
      if (s == "true" || s == "True" || s == "TRUE") return true;
      if (s == "false" || s == "False" || s == "FALSE") return false;
      {
        long long value = 0;
        const auto [ptr, ec] =
            std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec == std::errc() && ptr == s.data() + s.size()) return value;
      }
      {
        errno = 0;
        char* end = nullptr;
        const double value = std::strtod(s.c_str(), &end);
        if (errno == 0 && end == s.c_str() + s.size() &&
            s.find_first_of(".eE") != std::string::npos) {
          return value;
        }
      }
      return s;
    }
  };
  return Converter::convert(YAML::Load(yaml_text));
}

RoutingConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path.string(), "cannot open config file");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string ext = path.extension().string();
  json doc;
  if (ext == ".yaml" || ext == ".yml") {
    try {
      doc = yaml_to_json(buffer.str());
    } catch (const YAML::Exception& e) {
      throw ConfigError(path.string(), std::string("YAML parse: ") + e.what());
    }
  } else if (ext == ".json") {
    try {
      doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string(), std::string("JSON parse: ") + e.what());
    }
  } else {
    throw ConfigError(path.string(),
                      "unsupported config extension '" + ext +
                          "' (expected .yaml, .yml, or .json)");
  }
  return parse_config(doc);
}

Snapshot::Snapshot(RoutingConfig cfg, std::shared_ptr<const Encoder> enc,
                   RouteTable tbl, PiiDetector pii_detector,
                   JailbreakDetector jailbreak_detector)
    : config(std::move(cfg)),
      encoder(std::move(enc)),
      table(std::move(tbl)),
      pii(std::move(pii_detector)),
      jailbreak(std::move(jailbreak_detector)) {}

std::shared_ptr<const Snapshot> Snapshot::build(RoutingConfig config) {
  auto encoder = make_encoder(config.encoder.kind, config.encoder.dimension);
  return build_with_encoder(std::move(config), std::move(encoder));
}

std::shared_ptr<const Snapshot> Snapshot::build_with_encoder(
    RoutingConfig config, std::shared_ptr<const Encoder> encoder) {
  RouteTable table =
      RouteTable::build(config.routes, config.fallback, config.match, encoder);
  PiiDetector pii(config.guards.pii.custom);
  JailbreakDetector jailbreak(encoder, config.guards.jailbreak.exemplars,
                              config.guards.jailbreak.blocklist,
                              config.guards.jailbreak.threshold);
  return std::shared_ptr<const Snapshot>(
      new Snapshot(std::move(config), std::move(encoder), std::move(table),
                   std::move(pii), std::move(jailbreak)));
}

SnapshotHolder::SnapshotHolder(std::shared_ptr<const Snapshot> initial)
    : snapshot_(std::move(initial)) {}

std::shared_ptr<const Snapshot> SnapshotHolder::load() const {
  std::shared_lock lock(mutex_);
  return snapshot_;
}

void SnapshotHolder::store(std::shared_ptr<const Snapshot> next) {
  std::unique_lock lock(mutex_);
  snapshot_ = std::move(next);
}

bool SnapshotHolder::reload_from_file(const std::filesystem::path& path,
                                      std::string* error) {
  try {
    auto next = Snapshot::build(load_config(path));
    store(std::move(next));
    return true;
  } catch (const std::exception& e) {
    if (error != nullptr) *error = e.what();
    return false;
  }
}

}  // namespace semroute
