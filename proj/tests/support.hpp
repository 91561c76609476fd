// Shared helpers and brute-force oracles for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "ctiaug/corpus.hpp"
#include "ctiaug/encoder.hpp"
#include "ctiaug/trainer.hpp"

namespace ctiaug::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ctiaug-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// (label, text) pairs to a dataset with ids "<prefix><n>".
inline Dataset make_dataset(const std::vector<std::pair<std::string, std::string>>& rows,
                            Source source = Source::primary, const std::string& prefix = "s") {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.push_back({prefix + std::to_string(i), rows[i].second, rows[i].first, source, {}});
  return Dataset(std::move(out), source);
}

/// Random labeled corpus over a small shared vocabulary so texts overlap.
inline Dataset random_corpus(std::mt19937_64& gen, std::size_t n, std::size_t classes,
                             Source source, const std::string& prefix, std::size_t vocab = 40) {
  std::uniform_int_distribution<std::size_t> cls(0, classes - 1), tok(0, vocab - 1), len(1, 8);
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (std::size_t t = 0, m = len(gen); t < m; ++t)
      text += (t ? " w" : "w") + std::to_string(tok(gen));
    out.push_back({prefix + std::to_string(i), text, "c" + std::to_string(cls(gen)), source, {}});
  }
  return Dataset(std::move(out), source);
}

struct OracleF1 {
  double micro;
  double macro;
};

/// Micro-F1 as accuracy, macro-F1 from per-class loops over the examples.
inline OracleF1 oracle_f1(const std::vector<std::string>& golds,
                          const std::vector<std::string>& preds,
                          const std::vector<std::string>& catalog) {
  if (golds.empty()) return {0.0, 0.0};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) correct += golds[i] == preds[i];
  double macro = 0.0;
  for (const auto& c : catalog) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      if (preds[i] == c && golds[i] == c) ++tp;
      if (preds[i] == c && golds[i] != c) ++fp;
      if (preds[i] != c && golds[i] == c) ++fn;
    }
    macro += tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  }
  return {static_cast<double>(correct) / static_cast<double>(golds.size()),
          catalog.empty() ? 0.0 : macro / static_cast<double>(catalog.size())};
}

inline double oracle_cosine(const Vector& a, const Vector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Exhaustive scan: full auxiliary x primary cosine matrix, then per class the
/// best-scoring eligible auxiliary ids (score desc, id asc).
inline std::set<std::string> oracle_similarity_selection(const Dataset& primary,
                                                         const Dataset& auxiliary, std::size_t k,
                                                         const Encoder& encoder,
                                                         bool minority_only) {
  std::vector<Vector> pv, av;
  for (const auto& s : primary) pv.push_back(encoder.encode(s));
  for (const auto& s : auxiliary) av.push_back(encoder.encode(s));
  std::vector<std::vector<double>> sim(av.size(), std::vector<double>(pv.size()));
  for (std::size_t a = 0; a < av.size(); ++a)
    for (std::size_t p = 0; p < pv.size(); ++p) sim[a][p] = oracle_cosine(av[a], pv[p]);

  std::set<std::string> primary_texts;
  for (const auto& s : primary) primary_texts.insert(normalize(s.text));

  std::set<std::string> chosen;
  for (const auto& label : primary.labels()) {
    std::size_t size = 0;
    for (const auto& s : primary) size += s.label == label;
    if (minority_only && size >= k) continue;
    const std::size_t want = minority_only ? k - size : k;
    std::vector<std::pair<double, std::string>> scored;
    for (std::size_t a = 0; a < auxiliary.size(); ++a) {
      const auto& s = auxiliary.sentences()[a];
      if (s.label != label || primary_texts.contains(normalize(s.text))) continue;
      double best = -2.0;
      for (std::size_t p = 0; p < primary.size(); ++p) {
        if (primary.sentences()[p].label == label) best = std::max(best, sim[a][p]);
      }
      scored.emplace_back(-best, s.id);
    }
    std::sort(scored.begin(), scored.end());
    for (std::size_t j = 0; j < std::min(want, scored.size()); ++j) chosen.insert(scored[j].second);
  }
  return chosen;
}

/// A model with random parameters and a three-row dense batch.
struct GradientInstance {
  Model model;
  std::vector<SparseRow> rows;
  std::vector<std::size_t> labels;
};

inline GradientInstance random_instance(std::mt19937_64& gen, Architecture arch, std::size_t d,
                                        std::size_t c) {
  std::normal_distribution<double> nd;
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < c; ++i) classes.push_back("c" + std::to_string(i));
  for (;;) {
    GradientInstance inst{init_model(ModelSpec{arch, 2}, d, classes, gen()), {}, {}};
    for (double& p : inst.model.parameters()) p = nd(gen);
    for (std::size_t i = 0; i < 3; ++i) {
      SparseRow r;
      for (std::size_t j = 0; j < d; ++j) {
        r.index.push_back(static_cast<std::uint32_t>(j));
        r.value.push_back(nd(gen));
      }
      inst.rows.push_back(r);
      inst.labels.push_back(gen() % c);
    }
    if (arch == Architecture::linear) return inst;
    // Stay away from the ReLU kink.
    bool near_kink = false;
    const auto p = inst.model.parameters();
    for (const auto& r : inst.rows) {
      for (std::size_t h = 0; h < 2; ++h) {
        double pre = p[d * 2 + h];
        for (std::size_t j = 0; j < d; ++j) pre += p[h * d + j] * r.value[j];
        near_kink |= std::abs(pre) < 1e-4;
      }
    }
    if (!near_kink) return inst;
  }
}

/// ||analytic - numeric|| / max(||analytic||, ||numeric||), central
/// differences with h = 1e-5.
inline double gradient_relative_error(GradientInstance& inst) {
  std::vector<double> analytic;
  batch_loss_gradient(inst.model, inst.rows, inst.labels, &analytic);
  auto params = inst.model.parameters();
  std::vector<double> numeric(params.size());
  const double h = 1e-5;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = batch_loss(inst.model, inst.rows, inst.labels);
    params[i] = saved - h;
    const double down = batch_loss(inst.model, inst.rows, inst.labels);
    params[i] = saved;
    numeric[i] = (up - down) / (2 * h);
  }
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nn));
  return denom == 0 ? 0 : std::sqrt(diff) / denom;
}

}  // namespace ctiaug::testing
