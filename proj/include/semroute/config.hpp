#pragma once

#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semroute/embedding.hpp"
#include "semroute/guards.hpp"
#include "semroute/route_table.hpp"

namespace semroute {

/// Schema violation with the offending key path baked into what().
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path.empty() ? message
                                        : path + ": " + message) {}
};

struct EncoderConfig {
  std::string kind = "hashed";
  std::size_t dimension = HashedEncoder::kDefaultDimension;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

enum class PiiAction { Pass, Redact, Block };

std::string_view pii_action_name(PiiAction action);

struct PiiGuardConfig {
  PiiAction action = PiiAction::Redact;
  std::vector<CustomPiiRule> custom;

  friend bool operator==(const PiiGuardConfig&,
                         const PiiGuardConfig&) = default;
};

struct JailbreakGuardConfig {
  double threshold = 0.60;
  std::vector<std::string> exemplars;
  std::vector<std::string> blocklist;

  friend bool operator==(const JailbreakGuardConfig&,
                         const JailbreakGuardConfig&) = default;
};

struct GuardConfig {
  PiiGuardConfig pii;
  JailbreakGuardConfig jailbreak;

  friend bool operator==(const GuardConfig&, const GuardConfig&) = default;
};

enum class FailMode { Open, Closed };

struct PolicyConfig {
  FailMode fail_mode = FailMode::Open;

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

enum class MutationStrategy { Field, SystemPrompt };

struct MutationConfig {
  MutationStrategy strategy = MutationStrategy::Field;
  std::string field_path = "chat_template_kwargs.enable_thinking";
  std::string system_prompt_on = "Think step by step before answering.";
  std::string system_prompt_off =
      "Answer directly without showing your reasoning.";

  friend bool operator==(const MutationConfig&,
                         const MutationConfig&) = default;
};

/// Fully validated router configuration with defaults applied. Any value
/// this type holds is guaranteed to build a Snapshot without error.
struct RoutingConfig {
  EncoderConfig encoder;
  MatchPolicy match = MatchPolicy::Centroid;
  std::vector<RouteSpec> routes;
  FallbackSpec fallback;
  GuardConfig guards;
  PolicyConfig policy;
  MutationConfig mutation;

  nlohmann::json to_json() const;

  friend bool operator==(const RoutingConfig&, const RoutingConfig&) = default;
};

/// Validates a raw config document. Unknown keys are rejected; every error
/// names the offending key path. Throws ConfigError.
RoutingConfig parse_config(const nlohmann::json& doc);

/// Reads YAML (.yaml/.yml) or JSON (.json) by extension and validates.
RoutingConfig load_config(const std::filesystem::path& path);

/// Converts a YAML document to the equivalent JSON tree. Scalars map to
/// bool/int/double only for canonical literals; `on`/`off`/`yes`/`no` stay
/// strings.
nlohmann::json yaml_to_json(const std::string& yaml_text);

/// Everything a request handler needs, built once from a validated config
/// and shared immutably.
struct Snapshot {
  RoutingConfig config;
  std::shared_ptr<const Encoder> encoder;
  RouteTable table;
  PiiDetector pii;
  JailbreakDetector jailbreak;

  static std::shared_ptr<const Snapshot> build(RoutingConfig config);

  /// Same as build(), but with a caller-supplied encoder (the
  /// encoder-plugin seam; config.encoder is ignored).
  static std::shared_ptr<const Snapshot> build_with_encoder(
      RoutingConfig config, std::shared_ptr<const Encoder> encoder);

 private:
  Snapshot(RoutingConfig cfg, std::shared_ptr<const Encoder> enc,
           RouteTable tbl, PiiDetector pii_detector,
           JailbreakDetector jailbreak_detector);
};

/// Atomically published snapshot. Readers get a consistent shared_ptr;
/// writers swap the whole snapshot, never mutate in place.
class SnapshotHolder {
 public:
  SnapshotHolder() = default;
  explicit SnapshotHolder(std::shared_ptr<const Snapshot> initial);

  std::shared_ptr<const Snapshot> load() const;
  void store(std::shared_ptr<const Snapshot> next);

  /// Loads, validates, and publishes the file's config. On any failure the
  /// current snapshot stays live and the error text is returned.
  bool reload_from_file(const std::filesystem::path& path, std::string* error);

 private:
  mutable std::shared_mutex mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
};

}  // namespace semroute
