#include "ctiaug/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "ctiaug/error.hpp"

namespace ctiaug {

ConfusionCounts confusion(std::span<const std::string> golds,
                          std::span<const std::string> preds,
                          std::span<const std::string> catalog) {
  if (golds.size() != preds.size())
    throw ValidationError("confusion: " + std::to_string(golds.size()) + " golds vs " +
                          std::to_string(preds.size()) + " predictions");
  ConfusionCounts out;
  out.classes.assign(catalog.begin(), catalog.end());
  out.counts.resize(catalog.size());
  out.n = golds.size();
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < catalog.size(); ++i) index.emplace(catalog[i], i);
  auto lookup = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end()) throw ValidationError("confusion: unknown label `" + label + "`");
    return it->second;
  };
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto g = lookup(golds[i]);
    const auto p = lookup(preds[i]);
    if (g == p) {
      ++out.counts[g].tp;
    } else {
      ++out.counts[g].fn;
      ++out.counts[p].fp;
    }
  }
  return out;
}

double precision(const ClassCounts& c) {
  const auto d = c.tp + c.fp;
  return d == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(d);
}

double recall(const ClassCounts& c) {
  const auto d = c.tp + c.fn;
  return d == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(d);
}

double f1_score(const ClassCounts& c) {
  const double p = precision(c), r = recall(c);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double micro_f1(const ConfusionCounts& c) {
  ClassCounts total;
  for (const auto& k : c.counts) {
    total.tp += k.tp;
    total.fp += k.fp;
    total.fn += k.fn;
  }
  return f1_score(total);
}

double macro_f1(const ConfusionCounts& c) {
  if (c.counts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& k : c.counts) sum += f1_score(k);
  return sum / static_cast<double>(c.counts.size());
}

EvalReport evaluate(std::span<const std::string> golds, std::span<const std::string> preds,
                    std::span<const std::string> catalog, std::uint64_t seed) {
  const auto counts = confusion(golds, preds, catalog);
  EvalReport report;
  report.micro_f1 = micro_f1(counts);
  report.macro_f1 = macro_f1(counts);
  report.n_examples = counts.n;
  report.n_classes = counts.classes.size();
  report.seed = seed;
  for (std::size_t i = 0; i < counts.classes.size(); ++i) {
    const auto& k = counts.counts[i];
    report.per_class.push_back(
        {counts.classes[i], precision(k), recall(k), f1_score(k), k.tp + k.fn});
  }
  return report;
}

namespace {

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace

SeedSummary summarize_seeds(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ValidationError("summarize_seeds needs at least one report");
  std::vector<double> micro, macro;
  SeedSummary out;
  for (const auto& r : reports) {
    if (r.per_class.size() != reports.front().per_class.size())
      throw ValidationError("summarize_seeds: reports have different class catalogs");
    for (std::size_t i = 0; i < r.per_class.size(); ++i) {
      if (r.per_class[i].label != reports.front().per_class[i].label)
        throw ValidationError("summarize_seeds: reports have different class catalogs");
    }
    micro.push_back(r.micro_f1);
    macro.push_back(r.macro_f1);
    out.seeds.push_back(r.seed);
  }
  out.micro = summarize(micro);
  out.macro = summarize(macro);
  return out;
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * value);
  return buf;
}

}  // namespace ctiaug
