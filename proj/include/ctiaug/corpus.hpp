#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctiaug {

enum class Source { primary, auxiliary, mixed };

std::string_view to_string(Source source);
Source parse_source(std::string_view name);

/// One labeled sentence. `origin_id` is set only on synthesized copies
/// (oversampling) and names the sentence the copy was made from.
struct Sentence {
  std::string id;
  std::string text;
  std::string label;
  Source source = Source::primary;
  std::string origin_id;

  bool operator==(const Sentence&) const = default;
};

/// Ordered, immutable collection of sentences with a label catalog.
///
/// The catalog lists every label that occurs, in first-seen order unless a
/// `label_order` hint is given; in that case hinted labels come first in hint
/// order and any remaining labels follow in first-seen order. Ids must be
/// unique and every text must be non-empty after normalization.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Sentence> sentences, Source source,
          std::span<const std::string> label_order = {});

  const std::vector<Sentence>& sentences() const { return sentences_; }
  const std::vector<std::string>& labels() const { return labels_; }
  Source source() const { return source_; }
  std::size_t size() const { return sentences_.size(); }
  bool empty() const { return sentences_.empty(); }

  /// nullptr when absent.
  const Sentence* find(std::string_view id) const;
  bool has_label(std::string_view label) const;
  std::size_t label_index(std::string_view label) const;

  /// Indices into sentences(), one vector per catalog label (catalog order).
  const std::vector<std::vector<std::size_t>>& members() const { return members_; }
  std::span<const std::size_t> members_of(std::string_view label) const;

  /// Content hash over ids, texts, labels, sources and catalog.
  std::string fingerprint() const;

  auto begin() const { return sentences_.begin(); }
  auto end() const { return sentences_.end(); }

 private:
  std::vector<Sentence> sentences_;
  std::vector<std::string> labels_;
  Source source_ = Source::primary;
  std::unordered_map<std::string, std::size_t> id_index_;
  std::unordered_map<std::string, std::size_t> label_index_;
  std::vector<std::vector<std::size_t>> members_;
};

struct SplitRatio {
  unsigned train = 2;
  unsigned dev = 1;
  unsigned test = 1;
};

struct SplitBundle {
  Dataset train;
  Dataset dev;
  Dataset test;
};

/// Lowercase (ASCII), trim, and collapse whitespace runs to one space.
std::string normalize(std::string_view text);

/// Reads a dataset file: one JSON object per line with `text`, `label` and an
/// optional `id`. Records without an id get "<source>-line-<n>". Blank lines are
/// skipped. Throws ValidationError naming the offending line.
Dataset load_dataset(const std::filesystem::path& path, Source source);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Keeps the first sentence per (normalized text, label).
Dataset deduplicate(const Dataset& dataset);

using LabelMapping = std::map<std::string, std::string>;

/// Mapping file: one JSON object per line with `from` and `to`.
LabelMapping load_label_mapping(const std::filesystem::path& path);
Dataset merge_labels(const Dataset& dataset, const LabelMapping& mapping);

Dataset filter_min_class_size(const Dataset& dataset, std::size_t min_count);

/// Per-class shuffle then largest-remainder allocation; see split_sizes().
SplitBundle stratified_split(const Dataset& dataset, SplitRatio ratio,
                             std::uint64_t seed);

/// Number of members of a class of size `n` that go to (train, dev, test).
/// Quotas follow the ratio, remainders go to the largest fractional parts with
/// ties resolved train > dev > test, and each split gets at least one member
/// when n >= 3.
std::array<std::size_t, 3> split_sizes(std::size_t n, SplitRatio ratio);

std::map<std::string, std::size_t> class_histogram(const Dataset& dataset);

/// Writes <stem>.train, <stem>.dev, <stem>.test and <stem>.manifest.json.
void write_split(const SplitBundle& bundle, const std::filesystem::path& stem,
                 SplitRatio ratio, std::uint64_t seed);
SplitBundle load_split(const std::filesystem::path& stem);

}  // namespace ctiaug
