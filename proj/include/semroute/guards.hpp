#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semroute/embedding.hpp"

namespace semroute {

enum class PiiKind { Email, Phone, Ssn, CreditCard, Custom };

std::string_view pii_kind_name(PiiKind kind);

/// One detected PII occurrence. Offsets are byte offsets into the scanned
/// text; end is exclusive; matched_text equals the slice [start, end).
struct PiiSpan {
  PiiKind kind = PiiKind::Custom;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string matched_text;
  std::string custom_label;  // set only for Custom kinds

  std::string label() const {
    return kind == PiiKind::Custom ? custom_label
                                   : std::string(pii_kind_name(kind));
  }
};

/// Config-declared extra detector: ECMAScript regex, one span per match.
struct CustomPiiRule {
  std::string kind;
  std::string pattern;

  friend bool operator==(const CustomPiiRule&, const CustomPiiRule&) = default;
};

/// Pattern-based PII detection over raw text.
///
/// Built-in kinds:
///   EMAIL        local@domain.tld shape
///   SSN          ddd-dd-dddd, digit-bounded
///   PHONE        10-digit North American shapes, optional +1/1 prefix
///   CREDIT_CARD  13-19 digits, optionally space/hyphen grouped, Luhn-valid
///
/// Overlapping candidates resolve longest-match-first, then earliest-start.
/// Returned spans are non-overlapping and sorted by start offset.
class PiiDetector {
 public:
  PiiDetector();
  explicit PiiDetector(const std::vector<CustomPiiRule>& custom_rules);
  ~PiiDetector();
  PiiDetector(PiiDetector&&) noexcept;
  PiiDetector& operator=(PiiDetector&&) noexcept;

  std::vector<PiiSpan> detect(std::string_view text) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Luhn checksum over a digit string. Non-digit input returns false.
bool luhn_valid(std::string_view digits);

/// Replaces each span with "[PII:<kind>]", leaving bytes outside the spans
/// untouched. Out-of-range or overlapping spans throw
/// std::invalid_argument. A span whose matched_text no longer equals its
/// slice is skipped rather than applied blind.
std::string redact(std::string_view text, const std::vector<PiiSpan>& spans);

struct JailbreakVerdict {
  bool flagged = false;
  double score = 0.0;
  std::optional<std::string> matched_exemplar;
};

/// Similarity-plus-blocklist jailbreak screen. The exemplar centroid is
/// built exactly like a route centroid; a text is flagged when its cosine
/// against that centroid reaches the threshold or when it contains a
/// blocklist phrase verbatim (case-insensitive).
class JailbreakDetector {
 public:
  JailbreakDetector(std::shared_ptr<const Encoder> encoder,
                    std::vector<std::string> exemplars,
                    std::vector<std::string> blocklist, double threshold);

  JailbreakVerdict detect(std::string_view text) const;

  double threshold() const { return threshold_; }

 private:
  std::shared_ptr<const Encoder> encoder_;
  std::vector<std::string> exemplars_;
  std::vector<Embedding> exemplar_embeddings_;
  Embedding centroid_;
  std::vector<std::string> blocklist_;        // original casing, for reporting
  std::vector<std::string> blocklist_lower_;  // match key
  double threshold_;
};

}  // namespace semroute
