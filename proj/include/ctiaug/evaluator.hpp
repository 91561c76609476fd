#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctiaug {

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  bool operator==(const ClassCounts&) const = default;
};

/// Single-label confusion counts, one entry per catalog class.
struct ConfusionCounts {
  std::vector<std::string> classes;
  std::vector<ClassCounts> counts;
  std::size_t n = 0;
};

/// Throws ValidationError on a length mismatch or a label outside `catalog`.
ConfusionCounts confusion(std::span<const std::string> golds,
                          std::span<const std::string> preds,
                          std::span<const std::string> catalog);

/// F1 = 2PR / (P + R), 0 when P + R = 0.
double f1_score(const ClassCounts& c);
double precision(const ClassCounts& c);
double recall(const ClassCounts& c);

/// F1 of the summed counts. 0 for empty input.
double micro_f1(const ConfusionCounts& c);
/// Unweighted mean of per-class F1 over every catalog class; classes never
/// seen in golds or predictions count as F1 = 0.
double macro_f1(const ConfusionCounts& c);

inline constexpr const char* kMacroConvention =
    "macro-F1 averages over all gold-catalog classes; classes without support or "
    "predictions contribute F1 = 0";

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  std::vector<ClassMetrics> per_class;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_examples = 0;
  std::size_t n_classes = 0;
  std::uint64_t seed = 0;
};

EvalReport evaluate(std::span<const std::string> golds, std::span<const std::string> preds,
                    std::span<const std::string> catalog, std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> stddev;  // sample (n - 1) deviation; needs >= 2 seeds
};

struct SeedSummary {
  MetricSummary micro;
  MetricSummary macro;
  std::vector<std::uint64_t> seeds;
};

/// Throws ValidationError if the reports disagree on the class catalog.
SeedSummary summarize_seeds(std::span<const EvalReport> reports);

/// Percent with one decimal, e.g. 0.6125 -> "61.3".
std::string format_percent(double value);

}  // namespace ctiaug
