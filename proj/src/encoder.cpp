#include "ctiaug/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "ctiaug/error.hpp"
#include "ctiaug/hashing.hpp"
#include "jsonl.hpp"

namespace ctiaug {

namespace fs = std::filesystem;
using detail::json;

std::string_view to_string(EncoderKind kind) {
  return kind == EncoderKind::hashed_tfidf ? "hashed_tfidf" : "file_backed";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "hashed_tfidf") return EncoderKind::hashed_tfidf;
  if (name == "file_backed") return EncoderKind::file_backed;
  throw ValidationError("unknown encoder kind `" + std::string(name) + "`");
}

namespace {

std::vector<std::string_view> split_tokens(std::string_view normalized) {
  std::vector<std::string_view> tokens;
  std::size_t start = 0;
  while (start < normalized.size()) {
    auto end = normalized.find(' ', start);
    if (end == std::string_view::npos) end = normalized.size();
    tokens.push_back(normalized.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

void normalize_in_place(Vector& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
}

}  // namespace

std::vector<std::size_t> Encoder::buckets(std::string_view text) const {
  const std::string normalized = normalize(text);
  const auto tokens = split_tokens(normalized);
  const std::uint64_t basis = kFnvOffsetBasis ^ mix64(kNgramHashSeed);
  std::vector<std::size_t> out;
  std::string gram;
  for (int n = ngrams_.lo; n <= ngrams_.hi; ++n) {
    if (tokens.size() < static_cast<std::size_t>(n)) break;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      gram.assign(tokens[i]);
      for (int j = 1; j < n; ++j) {
        gram.push_back(' ');
        gram.append(tokens[i + j]);
      }
      out.push_back(static_cast<std::size_t>(mix64(fnv1a64(gram, basis)) % dimension_));
    }
  }
  return out;
}

Encoder Encoder::fit_hashed(const Dataset& corpus, std::size_t dimension,
                            NgramRange ngrams) {
  if (corpus.empty()) throw ValidationError("cannot fit encoder on an empty corpus");
  if (dimension < 64) throw ValidationError("encoder dimension must be >= 64");
  if (ngrams.lo < 1 || ngrams.lo > ngrams.hi || ngrams.hi > 3)
    throw ValidationError("n-gram range must satisfy 1 <= lo <= hi <= 3");

  Encoder e;
  e.kind_ = EncoderKind::hashed_tfidf;
  e.dimension_ = dimension;
  e.ngrams_ = ngrams;

  std::vector<std::size_t> df(dimension, 0);
  for (const auto& s : corpus) {
    auto b = e.buckets(s.text);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    for (auto bucket : b) ++df[bucket];
  }
  const double n_docs = static_cast<double>(corpus.size());
  e.idf_.assign(dimension, 1.0);
  for (std::size_t i = 0; i < dimension; ++i) {
    if (df[i] > 0)
      e.idf_[i] = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  }

  Fingerprint fp;
  fp.add(std::string_view("hashed_tfidf"))
      .add(static_cast<std::uint64_t>(dimension))
      .add(static_cast<std::uint64_t>(ngrams.lo))
      .add(static_cast<std::uint64_t>(ngrams.hi))
      .add(kNgramHashSeed);
  for (double w : e.idf_) fp.add(w);
  e.fingerprint_ = fp.hex();
  return e;
}

Encoder Encoder::from_vectors(std::vector<std::pair<std::string, Vector>> rows,
                              std::size_t dimension) {
  if (dimension == 0) throw ValidationError("embedding dimension must be positive");
  Encoder e;
  e.kind_ = EncoderKind::file_backed;
  e.dimension_ = dimension;
  for (auto& [id, v] : rows) {
    if (v.size() != dimension)
      throw ValidationError("embedding for `" + id + "` has dimension " +
                            std::to_string(v.size()) + ", expected " +
                            std::to_string(dimension));
    for (double x : v) {
      if (!std::isfinite(x))
        throw ValidationError("embedding for `" + id + "` has a non-finite value");
    }
    if (!e.vectors_.emplace(id, std::move(v)).second)
      throw ValidationError("duplicate embedding id `" + id + "`");
  }

  std::vector<const std::string*> ids;
  for (const auto& [id, _] : e.vectors_) ids.push_back(&id);
  std::sort(ids.begin(), ids.end(), [](auto* a, auto* b) { return *a < *b; });
  Fingerprint fp;
  fp.add(std::string_view("file_backed")).add(static_cast<std::uint64_t>(dimension));
  for (const auto* id : ids) {
    fp.add(*id);
    for (double x : e.vectors_.at(*id)) fp.add(x);
  }
  e.fingerprint_ = fp.hex();
  return e;
}

Vector Encoder::encode(const Sentence& sentence) const {
  Vector v;
  if (kind_ == EncoderKind::hashed_tfidf) {
    v.assign(dimension_, 0.0);
    for (auto bucket : buckets(sentence.text)) v[bucket] += 1.0;
    bool nonzero = false;
    for (std::size_t i = 0; i < dimension_; ++i) {
      v[i] *= idf_[i];
      nonzero = nonzero || v[i] != 0.0;
    }
    if (!nonzero)
      throw EncodingError("sentence `" + sentence.id + "` has no n-grams in range " +
                          std::to_string(ngrams_.lo) + ".." + std::to_string(ngrams_.hi));
  } else {
    auto it = vectors_.find(sentence.id);
    if (it == vectors_.end() && !sentence.origin_id.empty())
      it = vectors_.find(sentence.origin_id);
    if (it == vectors_.end())
      throw EncodingError("no embedding for sentence `" + sentence.id + "`");
    v = it->second;
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }))
      throw EncodingError("embedding for `" + sentence.id + "` is the zero vector");
  }
  normalize_in_place(v);
  return v;
}

std::string Encoder::fingerprint() const { return fingerprint_; }

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("cosine of vectors with dimensions " +
                          std::to_string(a.size()) + " and " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ValidationError("cosine of a zero vector");
  // The product of the two norms is commutative, so cosine(a, b) and
  // cosine(b, a) are bit-identical.
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

Encoder load_embedding_file(const fs::path& path, std::size_t expected_dimension) {
  std::vector<std::pair<std::string, Vector>> rows;
  std::set<std::string, std::less<>> ids;
  detail::for_each_record(path, [&](const json& record, std::size_t line_no) {
    auto id = detail::require_string(record, "id", path, line_no);
    const auto where = path.string() + ":" + std::to_string(line_no);
    auto it = record.find("vector");
    if (it == record.end() || !it->is_array())
      throw ValidationError(where + ": missing array field `vector`");
    if (it->size() != expected_dimension)
      throw ValidationError(where + ": embedding for `" + id + "` has dimension " +
                            std::to_string(it->size()) + ", expected " +
                            std::to_string(expected_dimension));
    Vector v;
    v.reserve(it->size());
    for (const auto& x : *it) {
      if (!x.is_number()) throw ValidationError(where + ": non-numeric component");
      // Vectors are held at single precision; see write_embedding_file().
      const double value = static_cast<float>(x.get<double>());
      if (!std::isfinite(value))
        throw ValidationError(where + ": embedding for `" + id + "` has a non-finite value");
      v.push_back(value);
    }
    if (!ids.insert(id).second)
      throw ValidationError(where + ": duplicate embedding id `" + id + "`");
    rows.emplace_back(std::move(id), std::move(v));
  });
  if (rows.empty()) throw ValidationError(path.string() + ": empty embedding file");
  return Encoder::from_vectors(std::move(rows), expected_dimension);
}

void write_embedding_file(const fs::path& path,
                          std::span<const std::pair<std::string, Vector>> rows) {
  auto out = detail::open_for_write(path);
  char buf[32];
  for (const auto& [id, v] : rows) {
    out << "{\"id\":" << json(id).dump() << ",\"vector\":[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]))
        throw ValidationError("embedding for `" + id + "` has a non-finite value");
      std::snprintf(buf, sizeof buf, "%.9g", v[i]);
      out << (i ? "," : "") << buf;
    }
    out << "]}\n";
  }
}

}  // namespace ctiaug
