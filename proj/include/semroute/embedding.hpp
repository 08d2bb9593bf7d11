#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace semroute {

/// Normalized semantic vector. Either all-zero (empty input) or unit L2 norm.
struct Embedding {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  bool is_zero() const;
  double norm() const;
};

/// Splits text into maximal runs of alphanumeric codepoints, lowercased.
/// Invalid UTF-8 bytes act as separators. Empty text yields an empty list.
std::vector<std::string> tokenize(std::string_view text);

/// Dot product of two same-dimension vectors. Inputs are expected to be
/// normalized, so this is cosine similarity; a zero vector scores 0.0
/// against anything. Throws std::invalid_argument on dimension mismatch.
double cosine(const Embedding& a, const Embedding& b);

/// Text-to-vector encoder contract. Implementations must be deterministic:
/// identical text always yields an identical Embedding of dimension().
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::size_t dimension() const = 0;
  virtual Embedding embed(std::string_view text) const = 0;
};

/// Default encoder: signed feature hashing of tokens.
///
/// Per token, a 64-bit FNV-1a hash h over the token bytes picks the bucket
/// (h mod D) and the sign (+1 when the top bit of h is clear, -1 otherwise).
/// Token contributions accumulate and the result is L2-normalized. An empty
/// token list maps to the all-zero vector.
class HashedEncoder final : public Encoder {
 public:
  static constexpr std::size_t kDefaultDimension = 256;

  explicit HashedEncoder(std::size_t dimension = kDefaultDimension);

  std::size_t dimension() const override { return dimension_; }
  Embedding embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
};

/// Mean of already-embedded vectors, re-normalized. Used for route and
/// jailbreak centroids. Empty input or a fully cancelling mean yields the
/// zero vector.
Embedding normalized_mean(const std::vector<Embedding>& embeddings);

/// FNV-1a 64-bit over a byte string.
std::uint64_t fnv1a64(std::string_view bytes);

/// Instantiates the encoder selected by `encoder.kind`. Only "hashed" is
/// built in; unknown kinds throw std::invalid_argument.
std::shared_ptr<const Encoder> make_encoder(const std::string& kind,
                                            std::size_t dimension);

}  // namespace semroute
