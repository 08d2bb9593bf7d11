#include "semroute/embedding.hpp"

#include <cmath>
#include <stdexcept>

namespace semroute {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

// Decodes one UTF-8 codepoint starting at `i`. Returns the codepoint and
// advances `i`; invalid sequences consume one byte and return 0xFFFD.
std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) -> std::uint32_t {
    return static_cast<unsigned char>(s[k]);
  };
  const std::uint32_t b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  std::size_t len = 0;
  std::uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k < len; ++k) {
    if ((byte(i + k) & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (byte(i + k) & 0x3F);
  }
  if (cp < 0x80 || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) {
    ++i;
    return 0xFFFD;  // overlong
  }
  i += len;
  return cp;
}

bool in_range(std::uint32_t cp, std::uint32_t lo, std::uint32_t hi) {
  return cp >= lo && cp <= hi;
}

// Word constituents: ASCII alphanumerics plus non-ASCII codepoints outside
// the common whitespace and punctuation blocks.
bool is_word_codepoint(std::uint32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
           (cp >= 'A' && cp <= 'Z');
  }
  if (cp == 0xFFFD) return false;
  if (cp == 0x00A0 || cp == 0x1680 || in_range(cp, 0x2000, 0x200A) ||
      cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F ||
      cp == 0x3000) {
    return false;  // Unicode whitespace
  }
  if (in_range(cp, 0x00A1, 0x00BF) || cp == 0x00D7 || cp == 0x00F7) {
    return false;  // Latin-1 punctuation and math signs
  }
  if (in_range(cp, 0x2010, 0x205E)) return false;    // general punctuation
  if (in_range(cp, 0x3001, 0x303F)) return false;    // CJK punctuation
  if (in_range(cp, 0xFE50, 0xFE6F)) return false;    // small form variants
  if (in_range(cp, 0xFF01, 0xFF0F) || in_range(cp, 0xFF1A, 0xFF20) ||
      in_range(cp, 0xFF3B, 0xFF40) || in_range(cp, 0xFF5B, 0xFF65)) {
    return false;  // fullwidth punctuation
  }
  return true;
}

std::uint32_t to_lower_codepoint(std::uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  // Latin-1 uppercase letters, skipping the multiplication sign.
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
  return cp;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

bool Embedding::is_zero() const {
  for (double v : values) {
    if (v != 0.0) return false;
  }
  return true;
}

double Embedding::norm() const {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::uint32_t cp = decode_utf8(text, i);
    if (is_word_codepoint(cp)) {
      append_utf8(current, to_lower_codepoint(cp));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.dimension() != b.dimension()) {
    throw std::invalid_argument("cosine: dimension mismatch (" +
                                std::to_string(a.dimension()) + " vs " +
                                std::to_string(b.dimension()) + ")");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
  }
  return dot;
}

HashedEncoder::HashedEncoder(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) {
    throw std::invalid_argument("HashedEncoder: dimension must be positive");
  }
}

Embedding HashedEncoder::embed(std::string_view text) const {
  Embedding out;
  out.values.assign(dimension_, 0.0);
  bool any = false;
  for (const std::string& token : tokenize(text)) {
    const std::uint64_t h = fnv1a64(token);
    const std::size_t bucket = static_cast<std::size_t>(h % dimension_);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    out.values[bucket] += sign;
    any = true;
  }
  if (!any) return out;
  const double n = out.norm();
  if (n > 0.0) {
    for (double& v : out.values) v /= n;
  }
  return out;
}

Embedding normalized_mean(const std::vector<Embedding>& embeddings) {
  Embedding out;
  if (embeddings.empty()) return out;
  out.values.assign(embeddings.front().dimension(), 0.0);
  for (const Embedding& e : embeddings) {
    if (e.dimension() != out.dimension()) {
      throw std::invalid_argument("normalized_mean: dimension mismatch");
    }
    for (std::size_t i = 0; i < e.values.size(); ++i) {
      out.values[i] += e.values[i];
    }
  }
  for (double& v : out.values) v /= static_cast<double>(embeddings.size());
  const double n = out.norm();
  if (n > 0.0) {
    for (double& v : out.values) v /= n;
  }
  return out;
}

std::shared_ptr<const Encoder> make_encoder(const std::string& kind,
                                            std::size_t dimension) {
  if (kind == "hashed") {
    return std::make_shared<HashedEncoder>(dimension);
  }
  throw std::invalid_argument("unknown encoder kind: " + kind);
}

}  // namespace semroute
