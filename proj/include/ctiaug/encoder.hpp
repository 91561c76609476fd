#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctiaug/corpus.hpp"

namespace ctiaug {

using Vector = std::vector<double>;

enum class EncoderKind { hashed_tfidf, file_backed };

std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

struct NgramRange {
  int lo = 1;
  int hi = 1;
};

/// Seed mixed into every n-gram hash. Changing it changes every bucket and
/// therefore every selection plan.
inline constexpr std::uint64_t kNgramHashSeed = 0x43544941554731ULL;

/// Maps sentences to unit-L2 vectors of a fixed dimension.
///
/// hashed_tfidf: whitespace tokens of the normalized text, word n-grams in
/// `ngrams`, each hashed into [0, dimension). Bucket weight is
/// count * idf, idf = ln((1 + N) / (1 + df)) + 1 over the fitting corpus, and
/// 1.0 for buckets never seen during fitting.
///
/// file_backed: vectors supplied externally, looked up by sentence id (or by
/// origin_id for oversampled copies).
///
/// Immutable after construction; encode() is safe to call concurrently.
class Encoder {
 public:
  static Encoder fit_hashed(const Dataset& corpus, std::size_t dimension,
                            NgramRange ngrams);
  static Encoder from_vectors(std::vector<std::pair<std::string, Vector>> rows,
                              std::size_t dimension);

  EncoderKind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  NgramRange ngrams() const { return ngrams_; }

  /// Throws EncodingError for an all-zero result or an unknown id.
  Vector encode(const Sentence& sentence) const;

  /// Bucket of every n-gram occurrence in `text` (hashed_tfidf only).
  std::vector<std::size_t> buckets(std::string_view text) const;

  /// Dense idf table (hashed_tfidf only); unseen buckets hold 1.0.
  const std::vector<double>& idf_table() const { return idf_; }
  /// Raw (unnormalized) vectors by id (file_backed only).
  const std::unordered_map<std::string, Vector>& vectors() const { return vectors_; }

  std::string fingerprint() const;

 private:
  Encoder() = default;

  EncoderKind kind_ = EncoderKind::hashed_tfidf;
  std::size_t dimension_ = 0;
  NgramRange ngrams_{};
  std::vector<double> idf_;
  std::unordered_map<std::string, Vector> vectors_;
  std::string fingerprint_;
};

inline Encoder fit_hashed_encoder(const Dataset& corpus, std::size_t dimension,
                                  NgramRange ngrams) {
  return Encoder::fit_hashed(corpus, dimension, ngrams);
}

inline Vector encode(const Encoder& encoder, const Sentence& sentence) {
  return encoder.encode(sentence);
}

/// Cosine similarity, clamped to [-1, 1]. Throws ValidationError on a
/// dimension mismatch or a zero vector.
double cosine(std::span<const double> a, std::span<const double> b);

/// Embedding file: one JSON object per line, {"id": ..., "vector": [...]}.
/// Every row must have `expected_dimension` finite components.
Encoder load_embedding_file(const std::filesystem::path& path,
                            std::size_t expected_dimension);

/// Components are written with 9 significant digits, so a write/load round
/// trip is exact for single-precision values.
void write_embedding_file(const std::filesystem::path& path,
                          std::span<const std::pair<std::string, Vector>> rows);

}  // namespace ctiaug
