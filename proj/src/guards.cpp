#include "semroute/guards.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <stdexcept>

namespace semroute {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_word_char(char c) { return is_digit(c) || is_alpha(c) || c == '_'; }
bool is_phone_sep(char c) { return c == '-' || c == '.' || c == ' '; }
bool is_card_sep(char c) { return c == '-' || c == ' '; }

bool is_local_char(char c) {
  return is_alpha(c) || is_digit(c) || c == '.' || c == '_' || c == '%' ||
         c == '+' || c == '-';
}
bool is_domain_char(char c) {
  return is_alpha(c) || is_digit(c) || c == '.' || c == '-';
}

struct Candidate {
  PiiKind kind;
  std::size_t start;
  std::size_t end;
  std::string custom_label;

  std::size_t length() const { return end - start; }
};

// local@domain.tld: the matched region extends as far right as the last
// dot-plus-alpha-run tail allows, mirroring a greedy regex.
void scan_emails(std::string_view text, std::vector<Candidate>& out) {
  std::size_t search_from = 0;
  for (std::size_t at = 0; at < text.size(); ++at) {
    if (text[at] != '@' || at < search_from) continue;
    std::size_t local_begin = at;
    while (local_begin > search_from && is_local_char(text[local_begin - 1])) {
      --local_begin;
    }
    if (local_begin == at) continue;
    std::size_t domain_end = at + 1;
    while (domain_end < text.size() && is_domain_char(text[domain_end])) {
      ++domain_end;
    }
    if (domain_end == at + 1) continue;
    // Best end: rightmost dot followed by >=2 letters, at least one domain
    // char between '@' and the dot.
    std::size_t best_end = 0;
    for (std::size_t d = at + 2; d < domain_end; ++d) {
      if (text[d] != '.') continue;
      std::size_t alpha_end = d + 1;
      while (alpha_end < domain_end && is_alpha(text[alpha_end])) ++alpha_end;
      if (alpha_end - d - 1 >= 2) best_end = std::max(best_end, alpha_end);
    }
    if (best_end == 0) continue;
    out.push_back({PiiKind::Email, local_begin, best_end, {}});
    search_from = best_end;
  }
}

// ddd-dd-dddd with word boundaries on both sides.
void scan_ssns(std::string_view text, std::vector<Candidate>& out) {
  if (text.size() < 11) return;
  for (std::size_t i = 0; i + 11 <= text.size(); ++i) {
    if (!(is_digit(text[i]) && is_digit(text[i + 1]) && is_digit(text[i + 2]) &&
          text[i + 3] == '-' && is_digit(text[i + 4]) &&
          is_digit(text[i + 5]) && text[i + 6] == '-' &&
          is_digit(text[i + 7]) && is_digit(text[i + 8]) &&
          is_digit(text[i + 9]) && is_digit(text[i + 10]))) {
      continue;
    }
    if (i > 0 && is_word_char(text[i - 1])) continue;
    if (i + 11 < text.size() && is_word_char(text[i + 11])) continue;
    out.push_back({PiiKind::Ssn, i, i + 11, {}});
  }
}

// Consumes exactly `n` digits starting at `pos`; returns false on shortfall.
bool take_digits(std::string_view text, std::size_t& pos, std::size_t n) {
  if (pos + n > text.size()) return false;
  for (std::size_t k = 0; k < n; ++k) {
    if (!is_digit(text[pos + k])) return false;
  }
  pos += n;
  return true;
}

// One optional separator, never two in a row.
void take_phone_sep(std::string_view text, std::size_t& pos) {
  if (pos < text.size() && is_phone_sep(text[pos]) && pos + 1 < text.size() &&
      is_digit(text[pos + 1])) {
    ++pos;
  }
}

// Area-exchange-line body: (ddd) ddd-dddd, ddd-ddd-dddd, ddd.ddd.dddd,
// ddd ddd dddd, or 10 contiguous digits. Returns end offset or 0.
std::size_t match_phone_body(std::string_view text, std::size_t pos) {
  std::size_t p = pos;
  if (p < text.size() && text[p] == '(') {
    ++p;
    if (!take_digits(text, p, 3)) return 0;
    if (p >= text.size() || text[p] != ')') return 0;
    ++p;
    take_phone_sep(text, p);
  } else {
    if (!take_digits(text, p, 3)) return 0;
    take_phone_sep(text, p);
  }
  if (!take_digits(text, p, 3)) return 0;
  take_phone_sep(text, p);
  if (!take_digits(text, p, 4)) return 0;
  return p;
}

void scan_phones(std::string_view text, std::vector<Candidate>& out) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (!(is_digit(c) || c == '(' || c == '+')) continue;
    if (i > 0 && is_digit(text[i - 1])) continue;

    std::size_t best = 0;
    // Country-code form first so an 11-digit run prefers the 1-prefix parse.
    if (c == '+' || c == '1') {
      std::size_t p = i;
      bool ok = true;
      if (c == '+') {
        ok = (i + 1 < text.size() && text[i + 1] == '1');
        p = i + 2;
      } else {
        p = i + 1;
      }
      if (ok) {
        take_phone_sep(text, p);
        const std::size_t end = match_phone_body(text, p);
        if (end != 0) best = end;
      }
    }
    if (best == 0 && c != '+') {
      const std::size_t end = match_phone_body(text, i);
      if (end != 0) best = end;
    }
    if (best == 0) continue;
    // Reject when the match is a prefix of a longer digit grouping.
    if (best < text.size()) {
      if (is_digit(text[best])) continue;
      if (is_phone_sep(text[best]) && best + 1 < text.size() &&
          is_digit(text[best + 1])) {
        continue;
      }
    }
    out.push_back({PiiKind::Phone, i, best, {}});
  }
}

void scan_cards(std::string_view text, std::vector<Candidate>& out) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_digit(text[i])) continue;
    if (i > 0 && is_digit(text[i - 1])) continue;

    // Maximal run of digit groups joined by single space/hyphen separators.
    std::string digits;
    std::size_t p = i;
    std::size_t last_digit_end = 0;
    while (p < text.size()) {
      if (is_digit(text[p])) {
        digits.push_back(text[p]);
        last_digit_end = ++p;
      } else if (is_card_sep(text[p]) && p + 1 < text.size() &&
                 is_digit(text[p + 1])) {
        ++p;
      } else {
        break;
      }
    }
    if (digits.size() >= 13 && digits.size() <= 19 && luhn_valid(digits)) {
      out.push_back({PiiKind::CreditCard, i, last_digit_end, {}});
    }
  }
}

int kind_rank(const Candidate& c) {
  switch (c.kind) {
    case PiiKind::Email: return 0;
    case PiiKind::Phone: return 1;
    case PiiKind::Ssn: return 2;
    case PiiKind::CreditCard: return 3;
    case PiiKind::Custom: return 4;
  }
  return 5;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

std::string_view pii_kind_name(PiiKind kind) {
  switch (kind) {
    case PiiKind::Email: return "EMAIL";
    case PiiKind::Phone: return "PHONE";
    case PiiKind::Ssn: return "SSN";
    case PiiKind::CreditCard: return "CREDIT_CARD";
    case PiiKind::Custom: return "CUSTOM";
  }
  return "CUSTOM";
}

bool luhn_valid(std::string_view digits) {
  if (digits.empty()) return false;
  int sum = 0;
  bool dbl = false;
  for (std::size_t k = digits.size(); k-- > 0;) {
    const char c = digits[k];
    if (!is_digit(c)) return false;
    int d = c - '0';
    if (dbl) {
      d *= 2;
      if (d > 9) d -= 9;
    }
    sum += d;
    dbl = !dbl;
  }
  return sum % 10 == 0;
}

struct PiiDetector::Impl {
  struct CompiledRule {
    std::string kind;
    std::regex pattern;
  };
  std::vector<CompiledRule> custom;
};

PiiDetector::PiiDetector() : impl_(std::make_unique<Impl>()) {}

PiiDetector::PiiDetector(const std::vector<CustomPiiRule>& custom_rules)
    : impl_(std::make_unique<Impl>()) {
  for (const CustomPiiRule& rule : custom_rules) {
    try {
      impl_->custom.push_back(
          {rule.kind, std::regex(rule.pattern, std::regex::ECMAScript)});
    } catch (const std::regex_error& e) {
      throw std::invalid_argument("invalid PII pattern for kind '" +
                                  rule.kind + "': " + e.what());
    }
  }
}

PiiDetector::~PiiDetector() = default;
PiiDetector::PiiDetector(PiiDetector&&) noexcept = default;
PiiDetector& PiiDetector::operator=(PiiDetector&&) noexcept = default;

std::vector<PiiSpan> PiiDetector::detect(std::string_view text) const {
  std::vector<Candidate> candidates;
  scan_emails(text, candidates);
  scan_ssns(text, candidates);
  scan_phones(text, candidates);
  scan_cards(text, candidates);
  for (const Impl::CompiledRule& rule : impl_->custom) {
    using Iter = std::regex_iterator<std::string_view::const_iterator>;
    for (Iter it(text.begin(), text.end(), rule.pattern), end; it != end;
         ++it) {
      const auto& m = *it;
      if (m.length(0) == 0) continue;
      const auto start = static_cast<std::size_t>(m.position(0));
      candidates.push_back(
          {PiiKind::Custom, start, start + m.length(0), rule.kind});
    }
  }

  // Longest match first, then earliest start, then a fixed kind order.
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.length() != b.length()) return a.length() > b.length();
              if (a.start != b.start) return a.start < b.start;
              return kind_rank(a) < kind_rank(b);
            });

  std::vector<Candidate> kept;
  for (const Candidate& c : candidates) {
    bool overlaps = false;
    for (const Candidate& k : kept) {
      if (c.start < k.end && k.start < c.end) {
        overlaps = true;
        break;
      }
    }
    if (!overlaps) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.start < b.start;
            });

  std::vector<PiiSpan> spans;
  spans.reserve(kept.size());
  for (const Candidate& c : kept) {
    PiiSpan span;
    span.kind = c.kind;
    span.start = c.start;
    span.end = c.end;
    span.matched_text = std::string(text.substr(c.start, c.end - c.start));
    span.custom_label = c.custom_label;
    spans.push_back(std::move(span));
  }
  return spans;
}

std::string redact(std::string_view text, const std::vector<PiiSpan>& spans) {
  std::vector<PiiSpan> ordered = spans;
  std::sort(ordered.begin(), ordered.end(),
            [](const PiiSpan& a, const PiiSpan& b) { return a.start < b.start; });
  std::size_t prev_end = 0;
  for (const PiiSpan& s : ordered) {
    if (s.start >= s.end || s.end > text.size()) {
      throw std::invalid_argument("redact: span out of range");
    }
    if (s.start < prev_end) {
      throw std::invalid_argument("redact: overlapping spans");
    }
    prev_end = s.end;
  }

  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  for (const PiiSpan& s : ordered) {
    // A span that no longer matches its recorded text has already been
    // rewritten; skip it so re-application is a no-op.
    if (text.substr(s.start, s.end - s.start) != s.matched_text) continue;
    out.append(text.substr(pos, s.start - pos));
    out.append("[PII:");
    out.append(s.label());
    out.push_back(']');
    pos = s.end;
  }
  out.append(text.substr(pos));
  return out;
}

JailbreakDetector::JailbreakDetector(std::shared_ptr<const Encoder> encoder,
                                     std::vector<std::string> exemplars,
                                     std::vector<std::string> blocklist,
                                     double threshold)
    : encoder_(std::move(encoder)),
      exemplars_(std::move(exemplars)),
      blocklist_(std::move(blocklist)),
      threshold_(threshold) {
  exemplar_embeddings_.reserve(exemplars_.size());
  for (const std::string& e : exemplars_) {
    exemplar_embeddings_.push_back(encoder_->embed(e));
  }
  centroid_ = exemplar_embeddings_.empty()
                  ? Embedding{std::vector<double>(encoder_->dimension(), 0.0)}
                  : normalized_mean(exemplar_embeddings_);
  blocklist_lower_.reserve(blocklist_.size());
  for (const std::string& b : blocklist_) {
    blocklist_lower_.push_back(ascii_lower(b));
  }
}

JailbreakVerdict JailbreakDetector::detect(std::string_view text) const {
  JailbreakVerdict verdict;
  const Embedding text_embedding = encoder_->embed(text);
  verdict.score = cosine(text_embedding, centroid_);

  const std::string lowered = ascii_lower(text);
  for (std::size_t i = 0; i < blocklist_lower_.size(); ++i) {
    if (!blocklist_lower_[i].empty() &&
        lowered.find(blocklist_lower_[i]) != std::string::npos) {
      verdict.flagged = true;
      verdict.matched_exemplar = blocklist_[i];
      return verdict;
    }
  }

  if (verdict.score >= threshold_ && !exemplar_embeddings_.empty()) {
    verdict.flagged = true;
    double best = -2.0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < exemplar_embeddings_.size(); ++i) {
      const double s = cosine(text_embedding, exemplar_embeddings_[i]);
      if (s > best) {
        best = s;
        best_idx = i;
      }
    }
    verdict.matched_exemplar = exemplars_[best_idx];
  }
  return verdict;
}

}  // namespace semroute
