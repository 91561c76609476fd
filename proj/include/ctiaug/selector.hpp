#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctiaug/corpus.hpp"
#include "ctiaug/encoder.hpp"

namespace ctiaug {

enum class Strategy {
  none,
  sim_minority,
  rand_minority,
  sim_all,
  rand_all,
  oversample_same,
  oversample_swap,
  all_auxiliary,
};

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view name);

/// Whether selections come from the primary training data (copies) rather
/// than the auxiliary pool.
bool draws_from_primary(Strategy strategy);
bool is_random(Strategy strategy);

struct Selection {
  std::string id;
  std::string label;
  std::optional<double> score;  // similarity strategies only
  std::string origin_id;        // oversampled copies only

  bool operator==(const Selection&) const = default;
};

struct AugmentationPlan {
  Strategy strategy = Strategy::none;
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::string encoder_fingerprint;  // empty for strategies without an encoder
  std::vector<Selection> selected;
  std::vector<std::string> notices;  // skipped classes etc.; not serialized

  bool operator==(const AugmentationPlan& o) const {
    return strategy == o.strategy && k == o.k && seed == o.seed &&
           encoder_fingerprint == o.encoder_fingerprint && selected == o.selected;
  }
};

/// Max cosine between `aux` and any member of `primary_class`.
double similarity_to_class(const Sentence& aux,
                           std::span<const Sentence> primary_class,
                           const Encoder& encoder);

// Auxiliary candidates for class c are the D^A sentences labeled c whose
// normalized text does not already occur in the primary training data.
// Classes with no candidates are skipped and reported in plan.notices.

/// For classes with |D^P_c| < k: the top min(k - |D^P_c|, |pool|) candidates by
/// similarity_to_class, ties by ascending id.
AugmentationPlan select_sim_minority(const Dataset& primary, const Dataset& auxiliary,
                                     std::size_t k, const Encoder& encoder);
/// Same classes and counts as select_sim_minority, sampled uniformly without
/// replacement.
AugmentationPlan select_rand_minority(const Dataset& primary, const Dataset& auxiliary,
                                      std::size_t k, std::uint64_t seed);
/// Every primary class: top min(k, |pool|) by similarity.
AugmentationPlan select_sim_all(const Dataset& primary, const Dataset& auxiliary,
                                std::size_t k, const Encoder& encoder);
AugmentationPlan select_rand_all(const Dataset& primary, const Dataset& auxiliary,
                                 std::size_t k, std::uint64_t seed);
/// Every auxiliary sentence whose label is in the primary catalog.
AugmentationPlan select_all_auxiliary(const Dataset& primary, const Dataset& auxiliary);

/// Minority classes are topped up to k with copies of their own members,
/// drawn uniformly with replacement. Copy ids are "<origin>#copy<n>".
AugmentationPlan oversample_same(const Dataset& primary, std::size_t k,
                                 std::uint64_t seed);
/// As oversample_same; apply_plan() additionally permutes the tokens of each
/// copy with max(1, round(0.1 * tokens)) random swaps.
AugmentationPlan oversample_swap(const Dataset& primary, std::size_t k,
                                 std::uint64_t seed);

AugmentationPlan plan_none();

/// Dispatches on `strategy`. `encoder` is required for similarity strategies.
AugmentationPlan build_plan(Strategy strategy, const Dataset& primary,
                            const Dataset& auxiliary, std::size_t k, std::uint64_t seed,
                            const Encoder* encoder);

/// The swapped text apply_plan() produces for an oversample_swap copy.
std::string swap_tokens(std::string_view text, std::uint64_t seed);

/// Primary training data followed by the materialized selections, grouped by
/// class (primary catalog order) and ascending id within a class.
Dataset apply_plan(const Dataset& primary_train, const Dataset& pool,
                   const AugmentationPlan& plan);

/// Plan file: a header record {strategy, k, seed, encoder} followed by one
/// record per selection {class, id, score, origin_id}.
void write_plan(const AugmentationPlan& plan, const std::filesystem::path& path);
AugmentationPlan read_plan(const std::filesystem::path& path);
std::string plan_fingerprint(const AugmentationPlan& plan);

}  // namespace ctiaug
